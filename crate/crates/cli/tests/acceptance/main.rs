//! Acceptance criteria, one line each. Pass a substring to run a subset.

mod benefit;
mod gradient;
mod kmedoids;
mod metrics;
mod mining;
mod pipeline;
mod splits;
mod trainer;

use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// A criterion returns a one-line summary on success and the reason on
/// failure.
pub type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = e.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = e.downcast_ref::<String>() {
        s.clone()
    } else {
        "panicked".into()
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "metric-oracle-equivalence",
            budget: Duration::from_secs(5),
            run: metrics::run,
        },
        Criterion {
            name: "gradient-correctness",
            budget: Duration::from_secs(30),
            run: gradient::run,
        },
        Criterion {
            name: "kmedoids-soundness",
            budget: Duration::from_secs(60),
            run: kmedoids::run,
        },
        Criterion {
            name: "mining-exactness",
            budget: Duration::from_secs(10),
            run: mining::run,
        },
        Criterion {
            name: "pipeline-determinism",
            budget: Duration::from_secs(120),
            run: pipeline::determinism,
        },
        Criterion {
            name: "iteration-monotonicity",
            budget: Duration::from_secs(120),
            run: pipeline::monotonicity,
        },
        Criterion {
            name: "restriction-contract",
            budget: Duration::from_secs(120),
            run: pipeline::restriction,
        },
        Criterion {
            name: "augmentation-benefit",
            budget: Duration::from_secs(300),
            run: benefit::run,
        },
        Criterion {
            name: "trainer-sanity",
            budget: Duration::from_secs(60),
            run: trainer::run,
        },
        Criterion {
            name: "unseen-split-contracts",
            budget: Duration::from_secs(10),
            run: splits::run,
        },
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !filters.is_empty() && !filters.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = panic::catch_unwind(c.run).unwrap_or_else(|e| Err(panic_message(e)));
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > c.budget => Err(format!(
                "took {:.1}s, over the {}s budget",
                elapsed.as_secs_f64(),
                c.budget.as_secs()
            )),
            other => other,
        };
        match result {
            Ok(summary) => println!(
                "PASS {:<26} {:>7.2}s  {summary}",
                c.name,
                elapsed.as_secs_f64()
            ),
            Err(reason) => {
                failed += 1;
                println!(
                    "FAIL {:<26} {:>7.2}s  {reason}",
                    c.name,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Fails the criterion with a message unless `cond` holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}
