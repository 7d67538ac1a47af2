//! Desk-scale benchmark runner: generated queries and hard instances of
//! growing size, translated and evaluated in memory under both translation
//! modes with and without the count-aggregation step.

use rcq_core::aggs::cnt;
use rcq_core::corpus::generated_corpus;
use rcq_core::datagolf::{dg_generate, training_db};
use rcq_core::eval::{cost, eval_ranf};
use rcq_core::structure::Structure;
use rcq_core::syntax::Query;
use rcq_core::translate::{rw, Mode, TransConfig};
use rcq_core::vgt::is_evaluable;
use std::time::{Duration, Instant};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub seeds: u64,
    pub size: usize,
    pub sizes_n: Vec<usize>,
    pub timeout: Duration,
}

#[derive(Clone, Debug)]
pub struct BenchRow {
    pub query: String,
    pub n: usize,
    pub tool: String,
    pub translate_ms: u128,
    pub cost: Option<u64>,
    pub rows: Option<String>,
    pub eval_ms: Option<u128>,
    pub status: String,
}

struct Cell {
    query_name: String,
    query: Query,
    n: usize,
    structure: Structure,
    mode: Mode,
    agg: bool,
}

fn tool_name(mode: Mode, agg: bool) -> String {
    let base = match mode {
        Mode::Rc2Sql => "rc2sql",
        Mode::Vgt => "vgt",
    };
    if agg {
        base.to_string()
    } else {
        format!("{base}-")
    }
}

fn run_cell(cell: &Cell, timeout: Duration) -> BenchRow {
    let tool = tool_name(cell.mode, cell.agg);
    let started = Instant::now();
    let mut row = BenchRow {
        query: cell.query_name.clone(),
        n: cell.n,
        tool,
        translate_ms: 0,
        cost: None,
        rows: None,
        eval_ms: None,
        status: "OK".into(),
    };
    if cell.mode == Mode::Vgt && !is_evaluable(&cell.query) {
        row.status = "N/A".into();
        return row;
    }
    let cfg = TransConfig {
        mode: cell.mode,
        cp_extra: true,
        training: training_db(&cell.query),
    };
    let translated = rw(&cell.query, &cfg);
    row.translate_ms = started.elapsed().as_millis();
    let (mut fin, mut inf) = match translated {
        Ok(pair) => pair,
        Err(_) => {
            row.status = "RE".into();
            return row;
        }
    };
    if started.elapsed() > timeout {
        row.status = "TO".into();
        return row;
    }
    if cell.agg {
        fin = cnt(&fin, &cfg.training);
        inf = cnt(&inf, &cfg.training);
        row.translate_ms = started.elapsed().as_millis();
    }
    if started.elapsed() > timeout {
        row.status = "TO".into();
        return row;
    }
    let eval_started = Instant::now();
    let inf_holds = match eval_ranf(&inf, &cell.structure) {
        Ok(r) => !r.is_empty(),
        Err(_) => {
            row.status = "RE".into();
            return row;
        }
    };
    if started.elapsed() > timeout {
        row.status = "TO".into();
        return row;
    }
    if inf_holds {
        row.rows = Some("INF".into());
    } else {
        match eval_ranf(&fin, &cell.structure) {
            Ok(r) => row.rows = Some(r.len().to_string()),
            Err(_) => {
                row.status = "RE".into();
                return row;
            }
        }
    }
    row.eval_ms = Some(eval_started.elapsed().as_millis());
    if started.elapsed() > timeout {
        row.status = "TO".into();
        return row;
    }
    let cf = cost(&fin, &cell.structure).ok();
    let ci = cost(&inf, &cell.structure).ok();
    row.cost = cf.zip(ci).map(|(a, b)| a.saturating_add(b));
    row
}

pub fn run(config: &BenchConfig) -> Vec<BenchRow> {
    let queries = generated_corpus(0..config.seeds, config.size);
    let mut cells = Vec::new();
    for (name, q) in &queries {
        for &n in &config.sizes_n {
            let Ok((s, _)) = dg_generate(q, n, 1, 0) else {
                continue;
            };
            for mode in [Mode::Rc2Sql, Mode::Vgt] {
                for agg in [true, false] {
                    cells.push(Cell {
                        query_name: name.clone(),
                        query: q.clone(),
                        n,
                        structure: s.clone(),
                        mode,
                        agg,
                    });
                }
            }
        }
    }
    let timeout = config.timeout;
    rcq_core::par::map_auto(&cells, |cell| run_cell(cell, timeout))
}

pub fn render(rows: &[BenchRow], markdown: bool) -> String {
    let header = [
        "query",
        "n",
        "tool",
        "translate_ms",
        "cost",
        "rows",
        "eval_ms",
        "status",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.query.clone(),
                r.n.to_string(),
                r.tool.clone(),
                r.translate_ms.to_string(),
                r.cost.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
                r.rows.clone().unwrap_or_else(|| "-".into()),
                r.eval_ms.map(|c| c.to_string()).unwrap_or_else(|| "-".into()),
                r.status.clone(),
            ]
        })
        .collect();
    let mut out = String::new();
    if markdown {
        out.push_str(&format!("| {} |\n", header.join(" | ")));
        out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
        for row in body {
            out.push_str(&format!("| {} |\n", row.join(" | ")));
        }
    } else {
        out.push_str(&header.join("\t"));
        out.push('\n');
        for row in body {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
    }
    out
}
