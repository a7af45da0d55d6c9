//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use snspdkit::config::RunConfig;
use snspdkit::reproduce::{Suite, CRITERIA};

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let suite = Suite::new(RunConfig::default());
    let mut failed = 0;
    for id in CRITERIA.iter().filter(|id| only.is_empty() || only.contains(id)) {
        let report = suite.run(*id);
        println!("{report}");
        failed += usize::from(!report.passed);
    }
    println!("acceptance: {failed} criteria failed");
}
