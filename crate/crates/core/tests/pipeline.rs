use cyclepoint::io::{read_samples, write_samples, SamplesHeader, SCHEMA_VERSION};
use cyclepoint::model::{changepoints_admissible, min_segment_len, omega_admissible, total_loglik};
use cyclepoint::simulate::{generate, Generator, GeneratorOptions};
use cyclepoint::summaries::{estimated_signal, posterior_k, time_varying_peak};
use cyclepoint::{run_chain, ChainConfig, Hyperparams, TimeSeries};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short_series(seed: u64, n: usize) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ts, _) = generate(Generator::Illustrative, GeneratorOptions::default(), &mut rng).unwrap();
    TimeSeries::new(ts.values()[250..250 + n].to_vec()).unwrap()
}

#[test]
fn samples_survive_a_file_round_trip() {
    let ts = short_series(2, 120);
    let hyper = Hyperparams::for_length(ts.len());
    let config = ChainConfig {
        iterations: 300,
        burn_in: 100,
        thin: 2,
        seed: 4,
        ..ChainConfig::default()
    };
    let out = run_chain(&ts, &hyper, &config).unwrap();
    let header = SamplesHeader {
        schema_version: SCHEMA_VERSION,
        n: ts.len(),
        hyper: hyper.clone(),
        config: config.clone(),
    };
    let mut buf = Vec::new();
    write_samples(&mut buf, &header, &out).unwrap();
    let back = read_samples(buf.as_slice()).unwrap();
    assert_eq!(back.header, header);
    assert_eq!(back.samples, out.samples);
    assert_eq!(back.iterations, out.sample_iterations);
}

#[test]
fn whole_series_summaries_cover_every_time_point() {
    let ts = short_series(3, 150);
    let config = ChainConfig {
        iterations: 400,
        burn_in: 100,
        ..ChainConfig::default()
    };
    let out = run_chain(&ts, &Hyperparams::for_length(ts.len()), &config).unwrap();
    let sig = estimated_signal(&out.samples, ts.len()).unwrap();
    assert_eq!(sig.mean.len(), 150);
    assert!(sig.lower.iter().zip(&sig.upper).all(|(l, u)| l <= u));
    let peak = time_varying_peak(&out.samples, ts.len()).unwrap();
    assert!(peak.iter().all(|&w| w > 0.0 && w < 0.5));
    let pk = posterior_k(&out.samples).unwrap();
    assert!((pk.values().sum::<f64>() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn every_stored_state_is_admissible(seed in 0u64..1_000, init_k in 0usize..3) {
        let ts = short_series(seed, 160);
        let hyper = Hyperparams::for_length(ts.len());
        let config = ChainConfig { iterations: 150, burn_in: 0, seed, init_k, ..ChainConfig::default() };
        let out = run_chain(&ts, &hyper, &config).unwrap();
        for (state, &ll) in out.samples.iter().zip(&out.loglik) {
            prop_assert!(state.k() <= hyper.k_max);
            prop_assert!(changepoints_admissible(&state.changepoints, ts.len(), hyper.psi_s));
            for (seg, b) in state.segments.iter().zip(state.bounds(ts.len())) {
                prop_assert!((1..=hyper.m_max).contains(&seg.m()));
                prop_assert!(b.len() >= min_segment_len(seg.m()));
                prop_assert!(omega_admissible(&seg.omega, hyper.psi_omega));
                prop_assert!(seg.sigma2 > 0.0);
            }
            let want = total_loglik(state, &ts).unwrap();
            prop_assert!((ll - want).abs() <= 1e-8 * want.abs().max(1.0));
        }
    }
}
