//! A small seeded contamination study comparing the true model, the
//! starting estimate and the converged estimate.

use cellwise::simulation::{run_simulation, CovarianceKind, SimulationConfig, Variant};
use cellwise::{ContaminationMode, DiConfig};

fn main() -> cellwise::Result<()> {
    for gamma in [2.0, 4.0, 6.0] {
        let config = SimulationConfig {
            covariance: CovarianceKind::A09,
            d: 8,
            n: 100,
            reps: 5,
            epsilon: 0.2,
            gamma,
            mode: ContaminationMode::Cellwise,
            seed: 1,
            di: DiConfig::default(),
        };
        let out = run_simulation(&config)?;
        let (d_init, d_di) = out.mean_discrepancy();
        let recall = |v| out.mean_recall(v).unwrap_or(f64::NAN);
        println!(
            "gamma {gamma}: recall true {:.3} initial {:.3} di {:.3}; D initial {d_init:.2} di {d_di:.2}",
            recall(Variant::TrueModel),
            recall(Variant::Initial),
            recall(Variant::Di)
        );
    }
    Ok(())
}
