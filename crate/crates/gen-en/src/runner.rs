//! Replication-parallel experiment execution.

use gen_en_core::experiments::{assemble, ExperimentContext, ExperimentOutput, ExperimentPlan, JobResult};
use rayon::prelude::*;

/// Runs every job of `plan` on `workers` threads. Each job has its own random
/// stream and results are reassembled in job order, so the output does not
/// depend on `workers`.
pub fn run_parallel(plan: &ExperimentPlan, workers: usize) -> gen_en_core::Result<ExperimentOutput> {
    let ctx = ExperimentContext::new(plan)?;
    let jobs = plan.jobs();
    let results: Vec<JobResult> = if workers <= 1 {
        jobs.iter().map(|j| ctx.run_job(j)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| jobs.par_iter().map(|j| ctx.run_job(j)).collect())
    };
    Ok(assemble(plan, results))
}

/// Worker count from `GEN_EN_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var("GEN_EN_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w| w > 0)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
