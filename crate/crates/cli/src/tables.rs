//! CSV renderings of run results. Floats use Rust's shortest round-trip
//! formatting so identical inputs give identical bytes.

use metasel::{DistributionTable, MetadataSchema, MetricReport, SelectionResult};
use serde::Serialize;

fn cell(table: &DistributionTable, j: usize) -> String {
    if table.included[j] {
        table.values[j].to_string()
    } else {
        String::new()
    }
}

/// `cell,Original,E,<column>...`, one row per schema cell. Cells excluded
/// from a table are left blank.
pub fn distribution_csv(
    schema: &MetadataSchema,
    original: &DistributionTable,
    expected: &DistributionTable,
    columns: &[(&str, &DistributionTable)],
) -> String {
    let mut out = String::from("cell,Original,E");
    for (name, _) in columns {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for j in 0..schema.cell_count() {
        out.push_str(&schema.cell_key(j));
        out.push(',');
        out.push_str(&cell(original, j));
        out.push(',');
        out.push_str(&cell(expected, j));
        for (_, table) in columns {
            out.push(',');
            out.push_str(&cell(table, j));
        }
        out.push('\n');
    }
    out
}

/// Appends `S_c` and `S_d` rows under a [`distribution_csv`] table. The
/// `E` column is left blank.
pub fn metric_rows(original: &MetricReport, columns: &[&MetricReport]) -> String {
    type Getter = fn(&MetricReport) -> f64;
    let mut out = String::new();
    let rows: [(&str, Getter); 2] = [("S_c", |r| r.s_c), ("S_d", |r| r.s_d)];
    for (name, get) in rows {
        out.push_str(&format!("{name},{},", get(original)));
        for r in columns {
            out.push_str(&format!(",{}", get(r)));
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(result: &SelectionResult) -> String {
    let r = &result.report;
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("method,{}\n", result.method));
    out.push_str(&format!("s_c,{}\n", r.s_c));
    out.push_str(&format!("s_d,{}\n", r.s_d));
    out.push_str(&format!("n,{}\n", result.n));
    out.push_str(&format!("N_s,{}\n", result.quota));
    out.push_str(&format!("rho,{}\n", result.keep_ratio));
    out.push_str(&format!("included_cells,{}\n", r.included_cell_count));
    out.push_str(&format!("fallback_admitted,{}\n", result.fallback_admitted));
    for (domain, err) in &r.per_domain_abs_error {
        out.push_str(&format!("abs_error/{},{}\n", quote(domain), err));
    }
    out
}

/// Quotes a CSV field when it needs it.
pub fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Linear-interpolation percentile of ascending `sorted`, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub p30: f64,
    pub p70: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Summary {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p30: percentile(&sorted, 0.3),
            p70: percentile(&sorted, 0.7),
        }
    }
}

/// One evaluated sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub rho: f64,
    pub target: String,
    pub s_c: Option<f64>,
    pub s_d: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub rho: f64,
    pub ok: usize,
    pub failed: usize,
    pub s_c: Option<Summary>,
    pub s_d: Option<Summary>,
}

/// Groups cells by ρ, keeping the order of `rho_list`.
pub fn summarize_sweep(rho_list: &[f64], cells: &[SweepCell]) -> Vec<SweepRow> {
    rho_list
        .iter()
        .map(|&rho| {
            let here: Vec<&SweepCell> = cells.iter().filter(|c| c.rho == rho).collect();
            let sc: Vec<f64> = here.iter().filter_map(|c| c.s_c).collect();
            let sd: Vec<f64> = here.iter().filter_map(|c| c.s_d).collect();
            SweepRow {
                rho,
                ok: sc.len(),
                failed: here.len() - sc.len(),
                s_c: (!sc.is_empty()).then(|| Summary::of(&sc)),
                s_d: (!sd.is_empty()).then(|| Summary::of(&sd)),
            }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rho,ok,failed,s_c_mean,s_c_p30,s_c_p70,s_d_mean,s_d_p30,s_d_p70\n");
    let fmt = |s: &Option<Summary>| match s {
        Some(s) => format!("{},{},{}", s.mean, s.p30, s.p70),
        None => ",,".to_string(),
    };
    for r in rows {
        out.push_str(&format!("{},{},{},{},{}\n", r.rho, r.ok, r.failed, fmt(&r.s_c), fmt(&r.s_d)));
    }
    out
}

pub fn sweep_cells_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("rho,target,s_c,s_d,error\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.rho,
            quote(&c.target),
            opt(c.s_c),
            opt(c.s_d),
            quote(c.error.as_deref().unwrap_or(""))
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use metasel::DomainSpec;

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0];
        assert_eq!(percentile(&v, 0.3), 4.0);
        assert_eq!(percentile(&v, 0.7), 8.0);
        assert!((percentile(&[0.0, 1.0], 0.3) - 0.3).abs() < 1e-15);
        assert_eq!(percentile(&[2.5], 0.7), 2.5);
        let s = Summary::of(&[3.0, 1.0, 2.0]);
        assert_eq!((s.mean, s.p30, s.p70), (2.0, 1.6, 2.4));
    }

    #[test]
    fn sweep_rows_follow_rho_order_and_count_failures() {
        let c = |rho: f64, v: Option<f64>| SweepCell {
            rho,
            target: "t".into(),
            s_c: v,
            s_d: v,
            error: v.is_none().then(|| "boom".to_string()),
        };
        let cells = [c(0.9, Some(0.9)), c(0.1, Some(0.5)), c(0.1, None), c(0.1, Some(0.7))];
        let rows = summarize_sweep(&[0.1, 0.9, 0.5], &cells);
        assert_eq!((rows[0].ok, rows[0].failed), (2, 1));
        assert!((rows[0].s_c.unwrap().mean - 0.6).abs() < 1e-12);
        assert_eq!(rows[1].s_c.unwrap().mean, 0.9);
        assert!(rows[2].s_c.is_none());
        let csv = sweep_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(3).unwrap().starts_with("0.5,0,0,,,"));
    }

    #[test]
    fn distribution_table_layout() {
        let schema = MetadataSchema::new(vec![DomainSpec::new("w", ["x", "y"])]).unwrap();
        let o = DistributionTable::new(vec![0.25, 0.5]);
        let mut e = DistributionTable::new(vec![0.3, 0.0]);
        e.exclude(1);
        let a = DistributionTable::new(vec![0.125, 1.0]);
        let csv = distribution_csv(&schema, &o, &e, &[("Achieved", &a)]);
        assert_eq!(csv, "cell,Original,E,Achieved\nw/x,0.25,0.3,0.125\nw/y,0.5,,1\n");
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a,b"), "\"a,b\"");
        assert_eq!(quote("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
