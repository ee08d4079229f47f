//! Batches of random instances and their CSV report.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pushgcs_core::conic::ConicSolver;
use pushgcs_core::geometry::SliderGeometry;

use crate::planner::sample::sample_task;
use crate::planner::{plan, PlanOptions, PlanResult};

pub const CSV_HEADER: [&str; 9] =
    ["instance", "seed", "success", "c_relax", "c_round", "gap", "relax_time_s", "round_time_s", "refine_time_s"];

#[derive(Clone, Debug, PartialEq)]
pub struct BatchRow {
    pub instance: usize,
    pub seed: u64,
    pub success: bool,
    pub c_relax: Option<f64>,
    pub c_round: Option<f64>,
    pub gap: Option<f64>,
    pub relax_time_s: Option<f64>,
    pub round_time_s: Option<f64>,
    pub refine_time_s: Option<f64>,
    /// Not written to the CSV.
    pub error: Option<String>,
}

/// Mean or median over the successful rows, column by column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    pub success_rate: f64,
    pub c_relax: f64,
    pub c_round: f64,
    pub gap: f64,
    pub relax_time_s: f64,
    pub round_time_s: f64,
    pub refine_time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchReport {
    pub rows: Vec<BatchRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

impl BatchReport {
    fn column(&self, f: impl Fn(&BatchRow) -> Option<f64>) -> Vec<f64> {
        self.rows.iter().filter(|r| r.success).filter_map(f).collect()
    }

    fn aggregate(&self, stat: fn(&[f64]) -> f64) -> Aggregate {
        let rate = if self.rows.is_empty() {
            f64::NAN
        } else {
            self.rows.iter().filter(|r| r.success).count() as f64 / self.rows.len() as f64
        };
        Aggregate {
            success_rate: rate,
            c_relax: stat(&self.column(|r| r.c_relax)),
            c_round: stat(&self.column(|r| r.c_round)),
            gap: stat(&self.column(|r| r.gap)),
            relax_time_s: stat(&self.column(|r| r.relax_time_s)),
            round_time_s: stat(&self.column(|r| r.round_time_s)),
            refine_time_s: stat(&self.column(|r| r.refine_time_s)),
        }
    }

    pub fn mean(&self) -> Aggregate {
        self.aggregate(mean)
    }

    pub fn median(&self) -> Aggregate {
        self.aggregate(median)
    }

    /// Rows in instance order followed by `mean` and `median` rows (empty
    /// report: header only). Without timings the time columns are blank.
    pub fn to_csv(&self, with_timings: bool) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).unwrap();
        let num = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let time = |v: Option<f64>| if with_timings { num(v) } else { String::new() };
        for r in &self.rows {
            w.write_record([
                r.instance.to_string(),
                r.seed.to_string(),
                u8::from(r.success).to_string(),
                num(r.c_relax),
                num(r.c_round),
                num(r.gap),
                time(r.relax_time_s),
                time(r.round_time_s),
                time(r.refine_time_s),
            ])
            .unwrap();
        }
        if !self.rows.is_empty() {
            let fin = |x: f64| if x.is_finite() { Some(x) } else { None };
            for (name, a) in [("mean", self.mean()), ("median", self.median())] {
                w.write_record([
                    name.to_string(),
                    String::new(),
                    if name == "mean" { num(fin(a.success_rate)) } else { String::new() },
                    num(fin(a.c_relax)),
                    num(fin(a.c_round)),
                    num(fin(a.gap)),
                    time(fin(a.relax_time_s)),
                    time(fin(a.round_time_s)),
                    time(fin(a.refine_time_s)),
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn row_from(instance: usize, seed: u64, result: Result<&PlanResult, String>) -> BatchRow {
    match result {
        Ok(r) => BatchRow {
            instance,
            seed,
            success: true,
            c_relax: Some(r.c_relax),
            c_round: Some(r.c_round),
            gap: Some(r.gap),
            relax_time_s: Some(r.timings.relaxation_s),
            round_time_s: Some(r.timings.rounding_s),
            refine_time_s: Some(r.timings.refinement_s),
            error: None,
        },
        Err(e) => BatchRow {
            instance,
            seed,
            success: false,
            c_relax: None,
            c_round: None,
            gap: None,
            relax_time_s: None,
            round_time_s: None,
            refine_time_s: None,
            error: Some(e),
        },
    }
}

/// Samples and plans `count` instances, at most `jobs` at a time. Instance
/// `i` is sampled from stream `i` of `seed` and rounded with `seed`; rows
/// come back in instance order whatever the completion order. `on_row` is
/// called as each instance finishes.
pub fn run_batch(
    geometry: &SliderGeometry,
    count: usize,
    seed: u64,
    jobs: usize,
    solver: &dyn ConicSolver,
    opts: &PlanOptions,
    on_row: &(dyn Fn(&BatchRow) + Sync),
) -> BatchReport {
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<BatchRow>>> = Mutex::new(vec![None; count]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(count.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let task = sample_task(geometry, seed, i as u64);
                let result = plan(&task, seed, solver, opts);
                let row = row_from(i, seed, result.as_ref().map_err(|e| e.to_string()));
                on_row(&row);
                rows.lock().unwrap()[i] = Some(row);
            });
        }
    });
    BatchReport { rows: rows.into_inner().unwrap().into_iter().map(|r| r.expect("every instance ran")).collect() }
}
