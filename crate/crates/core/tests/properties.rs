use proptest::prelude::*;

use taming_sde::cli::{parse_config_with_env, render, Command, RunConfig};
use taming_sde::model::{poly5, vector_field, jacobian_field};
use taming_sde::{pair_products, step, tame, BrownianGrid, SchemeKind, SdeModel};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn drift_only(d: usize) -> SdeModel {
    SdeModel::new(
        "cubic",
        vec![0.0; d],
        1.0,
        vector_field(|x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = -v * v * v + 0.5;
            }
        }),
        vec![vector_field(|_, out| out.fill(0.0))],
    )
    .unwrap()
    .with_jacobians(vec![jacobian_field(|_, out| out.fill(0.0))])
    .unwrap()
}

proptest! {
    #[test]
    fn taming_never_moves_more_than_one(
        v in prop::collection::vec(-1e12f64..1e12, 1..6),
        h in 1e-8f64..1.0,
    ) {
        let step = h * norm(&tame(&v, h));
        prop_assert!(step <= 1.0);
        prop_assert!(step <= h * norm(&v) * (1.0 + 1e-15));
    }

    #[test]
    fn pair_products_are_bitwise_symmetric(
        dw in prop::collection::vec(-5.0f64..5.0, 1..6),
        h in 1e-6f64..1.0,
    ) {
        let m = dw.len();
        let p = pair_products(&dw, h);
        for a in 0..m {
            for b in 0..m {
                prop_assert_eq!(p[a * m + b].to_bits(), p[b * m + a].to_bits());
            }
        }
    }

    #[test]
    fn coarsening_keeps_the_endpoint_and_composes(
        seed in any::<u64>(),
        k in 2u32..10,
        m in 1usize..4,
    ) {
        let n = 1usize << k;
        let fine = BrownianGrid::generate(seed, n, m, 1.0).unwrap();
        let w = fine.terminal_value();
        for j in 1..=k {
            let f = 1usize << j;
            let coarse = fine.coarsen(f).unwrap();
            prop_assert_eq!(coarse.steps(), n / f);
            prop_assert_eq!(coarse.terminal_value(), w.clone());
            if f < n {
                prop_assert_eq!(coarse.coarsen(2).unwrap(), fine.coarsen(2 * f).unwrap());
            }
        }
    }

    #[test]
    fn taming_changes_the_euler_step_by_the_closed_form(
        y in prop::collection::vec(-3.0f64..3.0, 1..=1),
        h in 1e-4f64..0.5,
        dw in -1.0f64..1.0,
    ) {
        let model = poly5();
        let mu = model.drift(&y);
        let nm = norm(&mu);
        let plain = step(SchemeKind::Euler, &model, &y, h, &[dw]).unwrap();
        let tamed = step(SchemeKind::TamedEuler, &model, &y, h, &[dw]).unwrap();
        let expect = h * h * nm * mu[0] / (1.0 + h * nm);
        let scale = 1.0 + plain[0].abs() + (h * mu[0]).abs();
        prop_assert!(((plain[0] - tamed[0]) - expect).abs() <= 1e-12 * scale);
    }

    #[test]
    fn milstein_reduces_to_euler_without_noise(
        y in prop::collection::vec(-4.0f64..4.0, 1..4),
        h in 1e-4f64..1.0,
        dw in -2.0f64..2.0,
    ) {
        let model = drift_only(y.len()).with_initial_state(y.clone()).unwrap();
        let e = step(SchemeKind::Euler, &model, &y, h, &[dw]).unwrap();
        let m = step(SchemeKind::Milstein, &model, &y, h, &[dw]).unwrap();
        let te = step(SchemeKind::TamedEuler, &model, &y, h, &[dw]).unwrap();
        let tm = step(SchemeKind::TamedMilstein, &model, &y, h, &[dw]).unwrap();
        prop_assert_eq!(e, m);
        prop_assert_eq!(te, tm);
    }

    #[test]
    fn rendered_configs_parse_back(
        command in prop::sample::select(vec![Command::Convergence, Command::Efficiency, Command::Moments, Command::Check]),
        model in prop::sample::select(vec!["poly5", "gbm", "diag2", "noncomm2"]),
        schemes in prop::sample::subsequence(SchemeKind::ALL.to_vec(), 1..=4),
        first in 0u32..6,
        count in 1u32..6,
        paths in 2usize..100_000,
        seed in any::<u64>(),
        ref_log in 2u32..6,
        eps in 1e-9f64..10.0,
        p in 1.0f64..8.0,
        flags in any::<[bool; 4]>(),
    ) {
        let config = RunConfig {
            command,
            model: model.to_string(),
            schemes,
            step_counts: (first..first + count).map(|k| 1usize << k).collect(),
            paths,
            master_seed: seed,
            ref_multiplier: 1 << ref_log,
            target_eps: eps,
            moment_p: p,
            output: flags[0].then(|| "out/table.csv".into()),
            allow_noncommutative: flags[1],
            no_runtime: flags[2],
            serial: flags[3],
        };
        let back = parse_config_with_env(render(&config), None).unwrap();
        prop_assert_eq!(back, config);
    }
}
