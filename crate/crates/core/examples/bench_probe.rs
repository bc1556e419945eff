use std::time::Instant;
use tariff_core::market;
use tariff_core::oracle::{self, FamilyMix};

fn main() {
    for (mix, label) in [(FamilyMix::QuadraticOnly, "quad"), (FamilyMix::Mixed, "mixed"), (FamilyMix::IsoelasticOnly, "iso")] {
        let t0 = Instant::now();
        let mut interior = 0;
        let n = 500;
        for seed in 0..n {
            let s = oracle::random_scenario(seed, 2, 2, mix).unwrap();
            let (var, flat) = market::solve_both(&s).unwrap();
            if !var.is_boundary_contaminated() && !flat.is_boundary_contaminated() {
                interior += 1;
            }
        }
        println!("{label}: {:?} for {n} gen+solve, interior rate {}", t0.elapsed(), interior as f64 / n as f64);
    }
}
