//! Simulates the three-segment illustrative series and prints the main
//! posterior summaries of a default-length run.

use std::time::Instant;

use cyclepoint::chain::{run_chain, ChainConfig};
use cyclepoint::hyper::Hyperparams;
use cyclepoint::simulate::{gen_piecewise_sinusoid, illustrative_truth};
use cyclepoint::summaries::{
    acceptance_report, changepoint_posterior, frequency_posterior, modal_m_joint, posterior_k,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(7), |s| s.parse())?;
    let truth = illustrative_truth();
    let ts = gen_piecewise_sinusoid(&truth, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let hyper = Hyperparams::for_length(ts.len());
    let config = ChainConfig {
        seed,
        ..ChainConfig::default()
    };
    let start = Instant::now();
    let out = run_chain(&ts, &hyper, &config)?;
    println!("elapsed {:.1?}", start.elapsed());
    println!("posterior k: {:?}", posterior_k(&out.samples)?);
    if let Ok(m) = modal_m_joint(&out.samples, 2) {
        println!("modal m | k=2: {m:?}");
        for (i, c) in changepoint_posterior(&out.samples, 2)?.iter().enumerate() {
            println!("s{} mean {:.2} sd {:.2}", i + 1, c.mean, c.sd);
        }
        if let Ok(f) = frequency_posterior(&out.samples, 2, &m) {
            for (j, seg) in f.iter().enumerate() {
                let means: Vec<String> = seg.iter().map(|s| format!("{:.4}({:.4})", s.mean, s.sd)).collect();
                println!("segment {} frequencies {}", j + 1, means.join(" "));
            }
        }
    }
    for row in acceptance_report(&out.acceptance) {
        println!("{:<12} {:<15} {:>9} {:.3}", row.family, row.kind, row.attempts, row.rate);
    }
    Ok(())
}
