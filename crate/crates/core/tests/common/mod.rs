#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sced_core::{load_scenario, Direction, InverterResource, Scenario, SyncGenerator, SystemParams};

pub const SIX_GEN: &str = include_str!("../../../../scenarios/six_gen.toml");

pub fn six_gen(h: f64, positive_only: bool) -> Scenario {
    let mut s = load_scenario(SIX_GEN).expect("bundled scenario loads");
    for g in &mut s.sgs {
        g.h = h;
    }
    s.positive_only = positive_only;
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two or three resources with narrow dispatch ranges (so a 0.01 MW grid is
/// exhaustive in reasonable time), at most one storage unit, β = 0. Charging
/// never reaches the upper SoC limit.
pub fn random_small_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let n = rng.gen_range(2..=3);
    let with_ibr = rng.gen_bool(0.6);
    let n_sg = if with_ibr { n - 1 } else { n };
    let dfnad = rng.gen_range(0.4..0.9);
    let params = SystemParams {
        f0: 50.0,
        rocof_max: rng.gen_range(0.5..1.5),
        dfnad_max: dfnad,
        dfqss_max: rng.gen_range(0.2..dfnad),
        t_pfr: rng.gen_range(4.0..10.0),
        dt: 300.0,
        demand: 0.0,
        direction: Direction::Up,
    };
    let sgs: Vec<SyncGenerator> = (0..n_sg)
        .map(|i| {
            let pmin = rng.gen_range(0.0..4.0);
            let pmax = pmin + rng.gen_range(4.0..9.0);
            SyncGenerator {
                id: format!("G{}", i + 1),
                pmin,
                pmax,
                pgov_max: rng.gen_bool(0.5).then(|| pmax + rng.gen_range(0.0..20.0)),
                cost_a: rng.gen_range(0.005..0.05),
                cost_b: rng.gen_range(1.0..5.0),
                cost_c: rng.gen_range(0.0..10.0),
                h: rng.gen_range(0.5..8.0),
                s_mva: rng.gen_range(20.0..80.0),
                droop_gain: rng.gen_range(150.0..400.0),
            }
        })
        .collect();
    let ibrs: Vec<InverterResource> = if with_ibr {
        let emax = rng.gen_range(5.0..20.0) * 3600.0;
        vec![InverterResource {
            id: "B".into(),
            pmin: rng.gen_range(-5.0..0.0),
            pmax: rng.gen_range(2.0..7.0),
            emin: 0.0,
            emax,
            e0: emax * rng.gen_range(0.3..0.6),
            eta: rng.gen_range(0.8..1.0),
            d_max: rng.gen_range(0.0..30.0),
            alpha: rng.gen_range(0.5..1.0),
            beta: 0.0,
            droop_gain: rng.gen_range(100.0..300.0),
            cost_energy: rng.gen_range(1.0..5.0),
            cost_inertia: rng.gen_range(0.0..0.5),
            cost_pfr_r: rng.gen_range(0.0..0.5),
            cost_pfr_d: rng.gen_range(0.0..0.5),
        }]
    } else {
        Vec::new()
    };
    let mut s = Scenario {
        params,
        conservative_mode: rng.gen_bool(0.5),
        positive_only: rng.gen_bool(0.3),
        sgs,
        ibrs,
    };
    let (lo, hi) = (s.total_pmin(), s.total_pmax());
    s.params.demand = lo + rng.gen_range(0.1..0.6) * (hi - lo);
    s
}
