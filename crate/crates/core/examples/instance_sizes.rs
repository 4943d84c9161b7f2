//! Prints, for every corpus VC, the eager instance count at bounds 0..=2
//! (capped at 50k), its small-model bound and the finite-model search results.
//!
//! `cargo run --release -p bhz-core --example instance_sizes`

use bhz::checker::{self, CheckOptions, FiniteSearch};
use bhz::frontend::{desugar, parse};
use bhz::horizon::bounded_instantiation_set;
use bhz::solver::SmtLimits;
use std::time::{Duration, Instant};

fn main() {
    for e in std::fs::read_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus")).unwrap() {
        let p = e.unwrap().path();
        let m = desugar(&parse(&std::fs::read_to_string(&p).unwrap()).unwrap()).unwrap();
        let vcs = checker::build_vcs(&m, &CheckOptions::default()).unwrap();
        for vc in &vcs {
            let mut line = format!("{:?} {}", p.file_name().unwrap(), vc.name());
            for k in 0..3 {
                let t = Instant::now();
                let n = bounded_instantiation_set(vc, k, 50_000).map(|s| s.len().to_string()).unwrap_or_else(|e| e.to_string());
                line += &format!(" k{k}={n}({:?})", t.elapsed());
            }
            let smb = checker::small_model_bound(vc);
            line += &format!(" smb={smb}");
            if smb <= 5 {
                for size in 1..=smb.max(1) {
                    let t = Instant::now();
                    let r = checker::find_finite_model(vc, size, &SmtLimits::with_timeout(Duration::from_secs(30)));
                    line += &format!(" fm{size}={}({:?})", matches!(r, FiniteSearch::None), t.elapsed());
                }
            }
            println!("{line}");
        }
    }
}
