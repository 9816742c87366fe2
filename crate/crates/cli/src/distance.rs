use std::fs;
use std::path::Path;

use rayon::prelude::*;

use adapted_ot::causal::{
    bicausal_distance_lp, build_causal_lp, causal_distance, Direction,
};
use adapted_ot::experiments::AGREEMENT_TOL;
use adapted_ot::format::sig12;
use adapted_ot::nested::nested_distance;
use adapted_ot::process::{check_compatible, FiniteProcess, MetricSpec};
use adapted_ot::topologies::{aldous_distance, hellwig_report};
use adapted_ot::transport::wasserstein;

use crate::table::Table;
use crate::{emit, json_text, CmdResult, Failure, Format, Global};

const COLUMNS: [&str; 8] = ["W", "CW_fwd", "CW_bwd", "SCW", "AW", "ND", "IW", "ALDOUS"];

pub fn run(
    g: &Global,
    mu: &FiniteProcess,
    nu: &FiniteProcess,
    m: &MetricSpec,
    dump_lp: Option<&Path>,
    value_table: Option<&Path>,
) -> CmdResult {
    check_compatible(mu, nu)?;
    if let Some(path) = dump_lp {
        let lp = build_causal_lp(mu, nu, m, Direction::Bicausal)?;
        write(path, &lp.to_lp_format())?;
    }

    // Independent solves; results are placed by index.
    let results: Vec<adapted_ot::Result<f64>> = (0..7)
        .into_par_iter()
        .map(|k| match k {
            0 => wasserstein(mu, nu, m),
            1 => causal_distance(mu, nu, m).map(|r| r.0),
            2 => causal_distance(nu, mu, m).map(|r| r.0),
            3 => bicausal_distance_lp(mu, nu, m).map(|r| r.0),
            4 => match value_table {
                Some(path) => {
                    let (v, table) = nested_distance(mu, nu, m)?;
                    fs::write(path, table.to_csv())?;
                    Ok(v)
                }
                None => nested_distance(mu, nu, m).map(|r| r.0),
            },
            5 => hellwig_report(mu, nu, m).map(|r| {
                if let Some(note) = r.note {
                    eprintln!("note: {note}");
                }
                r.value
            }),
            _ => aldous_distance(mu, nu, m),
        })
        .collect();
    let r: Vec<f64> = results.into_iter().collect::<adapted_ot::Result<_>>()?;
    let (w, fwd, bwd, aw, nd, iw, aldous) = (r[0], r[1], r[2], r[3], r[4], r[5], r[6]);
    let values = [w, fwd, bwd, fwd.max(bwd), aw, nd, iw, aldous];
    let delta = (aw - nd).abs();

    let out = match g.format.unwrap_or(Format::Table) {
        Format::Table => {
            let mut t = Table::new(["distance", "value"]);
            for (name, v) in COLUMNS.iter().zip(values) {
                t.row([name.to_string(), sig12(v)]);
            }
            t.row(["AW-ND".to_string(), sig12(delta)]);
            t.render()
        }
        Format::Csv => {
            let mut t = Table::new(COLUMNS.iter().map(|c| c.to_string()).chain(["AW_ND_DELTA".into()]));
            t.row(values.iter().chain([&delta]).map(|&v| sig12(v)));
            t.to_csv()
        }
        Format::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("p".into(), m.p().into());
            for (name, v) in COLUMNS.iter().zip(values) {
                obj.insert(name.to_string(), v.into());
            }
            obj.insert("AW_ND_DELTA".into(), delta.into());
            json_text(serde_json::Value::Object(obj))
        }
    };
    emit(g, &out)?;
    if delta > AGREEMENT_TOL {
        return Err(Failure::new(
            6,
            format!("AW (LP) and ND (DP) disagree by {}", sig12(delta)),
        ));
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text)
        .map_err(|e| Failure::new(2, format!("cannot write {}: {e}", path.display())))
}
