//! DBMS execution by shelling out to the `psql` or `mysql` client, so the
//! harness carries no driver dependency. The schema is recreated on every
//! invocation.

use rcq_core::sql::{schema_sql, Dialect, SqlOptions};
use rcq_core::structure::Structure;
use rcq_core::syntax::Signature;
use std::io::Write;
use std::process::Command;

pub enum DbmsError {
    Connection(String),
    Semantic(String),
}

pub fn dialect_for_url(url: &str) -> Option<Dialect> {
    if url.starts_with("postgres://") || url.starts_with("postgresql://") {
        Some(Dialect::PostgreSql)
    } else if url.starts_with("mysql://") {
        Some(Dialect::MySql)
    } else {
        None
    }
}

/// Runs the schema script and the query, returning result rows as strings.
pub fn execute(
    url: &str,
    s: &Structure,
    sig: &Signature,
    query_sql: &str,
    int_columns: bool,
) -> Result<Vec<Vec<String>>, DbmsError> {
    let dialect = dialect_for_url(url)
        .ok_or_else(|| DbmsError::Connection(format!("unsupported DBMS url {url}")))?;
    let opts = SqlOptions {
        dialect,
        order: true,
    };
    let mut script = schema_sql(s, sig, &opts, int_columns);
    script.push_str(query_sql);
    script.push('\n');

    let mut file = tempfile_in_tmp().map_err(DbmsError::Connection)?;
    file.1
        .write_all(script.as_bytes())
        .map_err(|e| DbmsError::Connection(format!("cannot write SQL script: {e}")))?;
    let path = file.0.clone();

    let output = match dialect {
        Dialect::PostgreSql => Command::new("psql")
            .arg(url)
            .args(["-X", "-q", "-v", "ON_ERROR_STOP=1", "-At", "-F", "\t", "-f"])
            .arg(&path)
            .output(),
        Dialect::MySql => Command::new("mysql")
            .arg("--defaults-extra-file=/dev/null")
            .args(["--batch", "--skip-column-names", "-e"])
            .arg(format!("source {path}"))
            .arg(url.trim_start_matches("mysql://"))
            .output(),
    };
    let output = output.map_err(|e| {
        DbmsError::Connection(format!("cannot launch the DBMS client: {e}"))
    })?;
    std::fs::remove_file(&path).ok();
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(DbmsError::Semantic(format!(
            "DBMS client failed: {}",
            stderr.trim()
        )));
    }
    let stdout = String::from_utf8_lossy(&output.stdout);
    Ok(stdout
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split('\t').map(|c| c.to_string()).collect())
        .collect())
}

fn tempfile_in_tmp() -> Result<(String, std::fs::File), String> {
    let dir = std::env::temp_dir();
    let path = dir.join(format!("rcq-{}-{}.sql", std::process::id(), now_nanos()));
    let file = std::fs::File::create(&path)
        .map_err(|e| format!("cannot create temp file: {e}"))?;
    Ok((path.to_string_lossy().into_owned(), file))
}

fn now_nanos() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0)
}
