use hams_core::diagnostics::ess_bartlett;
use hams_core::hams::PhaseState;
use hams_core::precondition::{whiten, whitener_from_precision};
use hams_core::rng::{RngStream, DATA_STREAM};
use hams_core::targets::{simulate_cox, CoxModel, PreconditionedModel};
use hams_lab::config::SamplerKind;
use hams_lab::sampler::autotune_chain;

fn main() {
    let mu = (126.0f64).ln() - 0.955;
    for (label, beta) in [("criterion beta=1/33", 1.0 / 33.0), ("regime beta=64/(33*16)", 64.0 / 33.0 / 16.0)] {
        println!("--- {label} ---");
        let mut data_rng = RngStream::new(1234, DATA_STREAM);
        let (_, y) = simulate_cox(16, 1.91, beta, mu, &mut data_rng).unwrap();
        let cox = CoxModel::new(16, 1.91, beta, mu, y).unwrap();
        let w = whitener_from_precision(&cox.approx_precision()).unwrap();
        let model = whiten(&cox, &w);
        let dim = 256;
        for sampler in SamplerKind::benchmark_set() {
            let mut min_acc: f64 = 1.0;
            let mut mean_min_ess = 0.0;
            let reps = 6u64;
            for rep in 0..reps {
                let mut rng = RngStream::new(1234, rep);
                let x0: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                let u0: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
                let tuned = autotune_chain(
                    sampler, 1.0, true, &model,
                    PhaseState::new(w.to_whitened(&x0), u0).unwrap(),
                    0.7, 5000, &mut rng,
                ).unwrap();
                let mut state = tuned.state;
                let n = 5000usize;
                let mut draws = vec![vec![0.0; n]; dim];
                let mut acc = 0usize;
                for i in 0..n {
                    let (a, _) = tuned.kernel.step(&model, &mut state, &mut rng).unwrap();
                    acc += usize::from(a);
                    let x = w.from_whitened(&state.phase().x);
                    for j in 0..dim { draws[j][i] = x[j]; }
                }
                min_acc = min_acc.min(acc as f64 / n as f64);
                mean_min_ess += draws.iter().map(|s| ess_bartlett(s, 3000).unwrap()).fold(f64::INFINITY, f64::min);
            }
            println!("  {:>9}: mean minESS1 = {:6.0}  (min acc {:.3})", sampler.name(), mean_min_ess / reps as f64, min_acc);
        }
    }
}
