//! Property and invariant checks shared by the `invariants` test target and
//! the acceptance run.

#![allow(dead_code)]

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use revanneal_core::davies::{effective_hamiltonian, gibbs_state, DaviesModel};
use revanneal_core::mcwf::{run_samples, DensityState};
use revanneal_core::*;
use std::result::Result;

fn spec(n: usize, p: u32, space: Space) -> ProblemSpec {
    ProblemSpec::new(n, p, ScheduleCurves::linear(), space).unwrap()
}

/// Runs `test` on 24 deterministic cases, panicking on the first failure.
fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) {
    let config = Config {
        cases: 24,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    if let Err(e) = runner.run(&strategy, test) {
        panic!("{e}");
    }
}

pub fn hamiltonian_is_hermitian() {
    check(
        (2usize..=8, 2u32..=5, 0.0f64..=1.0, any::<bool>()),
        |(n, p, s, full)| {
            prop_assume!(p as usize <= n);
            let space = if full && n <= 6 {
                Space::Full
            } else {
                Space::Dicke
            };
            let h = spec(n, p, space).build_h(s).unwrap();
            prop_assert!((&h - h.transpose()).amax() < 1e-12);
            Ok(())
        },
    );
}

pub fn su2_commutator_and_casimir() {
    check((1usize..=20,), |(n,)| {
        let (_, ops) = build_dicke_sector(n).unwrap();
        let iy = ops.i_s_y();
        // [S_x, S_z] = -2 i S_y
        let comm = &ops.s_x * &ops.s_z - &ops.s_z * &ops.s_x;
        prop_assert!((comm + &iy * 2.0).amax() < 1e-9);
        // S_x^2 + S_y^2 + S_z^2 = n (n + 2)
        let c = &ops.s_x * &ops.s_x - &iy * &iy + &ops.s_z * &ops.s_z;
        let target = DMatrix::identity(n + 1, n + 1) * (n * (n + 2)) as f64;
        prop_assert!((c - target).amax() < 1e-9 * (n * n) as f64);
        Ok(())
    });
}

pub fn schedule_is_continuous() {
    check(
        (
            1.0f64..500.0,
            0.01f64..0.99,
            0.0f64..300.0,
            0.0f64..1.0,
            0.0f64..1.0,
        ),
        |(tau, s_inv, pause, u, delta)| {
            let path = AnnealPath::reverse_paused(tau, s_inv, pause).unwrap();
            let t = u * path.duration();
            let d = delta * (path.duration() - t);
            let bound = d / tau * f64::max(1.0, (1.0 - s_inv) / s_inv);
            prop_assert!((path.s_at(t + d) - path.s_at(t)).abs() <= bound * (1.0 + 1e-12) + 1e-15);
            for b in path.breakpoints() {
                let l = path.s_at((b - 1e-9).max(0.0));
                let r = path.s_at((b + 1e-9).min(path.duration()));
                prop_assert!((l - r).abs() < 1e-8);
            }
            Ok(())
        },
    );
}

pub fn forward_path_is_the_identity_line() {
    check((0.1f64..1e3, 0.0f64..=1.0), |(tau, u)| {
        let path = AnnealPath::forward(tau).unwrap();
        let t = u * tau;
        prop_assert_eq!(path.s_of_t(t).unwrap(), t / tau);
        Ok(())
    });
}

pub fn reverse_path_visits_each_value_twice() {
    check(
        (1.0f64..500.0, 0.01f64..0.99, 0.0f64..1.0),
        |(tau, s_inv, v)| {
            let path = AnnealPath::reverse(tau, s_inv).unwrap();
            let target = s_inv + v * (1.0 - s_inv);
            prop_assume!(target - s_inv > 1e-6);
            let t_inv = path.t_inv();
            let down = tau * (1.0 - target);
            let rise = tau - t_inv;
            let up = t_inv + rise * (target - s_inv) / (1.0 - s_inv);
            prop_assert!((path.s_at(down) - target).abs() < 1e-9);
            prop_assert!((path.s_at(up) - target).abs() < 1e-9);
            // strictly monotone on each leg
            let k = 64;
            for i in 0..k {
                let (a, b) = (i as f64 / k as f64, (i + 1) as f64 / k as f64);
                prop_assert!(path.s_at(t_inv * b) < path.s_at(t_inv * a));
                prop_assert!(path.s_at(t_inv + rise * b) > path.s_at(t_inv + rise * a));
            }
            Ok(())
        },
    );
}

pub fn ground_energy_is_variational() {
    check((2usize..=12, 0.0f64..=1.0, any::<u64>()), |(n, s, seed)| {
        let sp = spec(n, 3.min(n as u32), Space::Dicke);
        let h = sp.build_h(s).unwrap();
        let d = decompose(&sp, s).unwrap();
        let mut x = seed;
        let psi = nalgebra::DVector::from_fn(n + 1, |_, _| {
            x = x
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        let psi = psi.normalize();
        prop_assert!(d.energies[0] <= psi.dot(&(&h * &psi)) + 1e-9);
        Ok(())
    });
}

pub fn odd_p_gap_is_positive() {
    check((3usize..=20, 0.0f64..=1.0), |(n, s)| {
        prop_assert!(spec(n, 3, Space::Dicke).gap_at(s) > 1e-10);
        Ok(())
    });
}

pub fn unitary_norm_is_preserved() {
    check(
        (2usize..=16, 0.05f64..0.95, 1.0f64..30.0),
        |(n, s_inv, tau)| {
            let sp = spec(n, 2.max(3.min(n as u32)), Space::Dicke);
            let path = AnnealPath::reverse(tau, s_inv).unwrap();
            let psi0 = PureState::dicke(sp.representation(), 1).unwrap();
            let out = evolve_unitary(&sp, &path, &psi0, 1e-11).unwrap();
            prop_assert!(out.norm_drift < 1e-8, "drift {}", out.norm_drift);
            Ok(())
        },
    );
}

pub fn kms_balance() {
    check(
        (1e-3f64..500.0, 1e-5f64..1e-1, 0.05f64..5.0, 0.1f64..10.0),
        |(w, eta, wc, t)| {
            let bath = BathSpec {
                eta,
                omega_c_thz: wc,
                temperature_ghz: t,
                ..BathSpec::default()
            };
            let (up, down) = (rate(-w, &bath), rate(w, &bath));
            prop_assert!(up >= 0.0 && down > 0.0);
            let expect = (-w / bath.temperature()).exp();
            if expect > 1e-280 {
                prop_assert!((up / down / expect - 1.0).abs() < 1e-10);
            }
            Ok(())
        },
    );
}

pub fn decay_part_is_negative_semidefinite() {
    check(
        (0.0f64..=1.0, any::<bool>(), 2usize..=5),
        |(s, independent, n)| {
            let p = 3.min(n as u32);
            let sp = spec(n, p, Space::Full);
            let bath = if independent {
                BathSpec::independent()
            } else {
                BathSpec::collective()
            };
            let model = DaviesModel::new(&sp, &bath, None).unwrap();
            let b = model.bundle(s).unwrap();
            let heff = effective_hamiltonian(&b, sp.representation());
            let anti = (&heff - heff.adjoint()) * C64::new(0.0, -0.5);
            let ev = anti.symmetric_eigenvalues();
            prop_assert!(ev.max() <= 1e-12 * ev.amax().max(1.0));
            Ok(())
        },
    );
}

pub fn oracle_preserves_trace_and_positivity() {
    check(
        (0.1f64..0.9, any::<bool>(), 2usize..=4),
        |(s_inv, independent, n)| {
            let p = 3.min(n as u32);
            let sp = spec(n, p, Space::Full);
            let bath = if independent {
                BathSpec::independent()
            } else {
                BathSpec::collective()
            }
            .with_eta(1e-2);
            let model = DaviesModel::new(&sp, &bath, None).unwrap();
            let psi = PureState::dicke(sp.representation(), 1).unwrap();
            let rho0 = DensityState::from_pure(&model, &psi).unwrap();
            let path = AnnealPath::reverse(3.0, s_inv).unwrap();
            let out = lindblad_oracle(&model, &path, &rho0, &OracleOptions::default()).unwrap();
            prop_assert!(out.trace_error < 1e-9, "trace error {}", out.trace_error);
            prop_assert!(out.positivity_ok());
            Ok(())
        },
    );
}

pub fn gibbs_state_is_stationary() {
    check(
        (0.05f64..0.95, any::<bool>(), 2usize..=4),
        |(s, independent, n)| {
            let p = 3.min(n as u32);
            let sp = spec(n, p, Space::Full);
            let bath = if independent {
                BathSpec::independent()
            } else {
                BathSpec::collective()
            };
            let model = DaviesModel::new(&sp, &bath, None).unwrap();
            let blocks = gibbs_state(&sp, s, &bath).unwrap();
            let mult = sp.representation().sectors.iter().map(|x| x.mult).collect();
            let rho = DensityState { blocks, mult };
            let out = lindblad_oracle(
                &model,
                &AnnealPath::hold(2.0, s).unwrap(),
                &rho,
                &OracleOptions {
                    tol: 1e-12,
                    check_every: 100,
                },
            )
            .unwrap();
            prop_assert!(out.state.trace_distance(&rho) < 1e-8);
            Ok(())
        },
    );
}

pub fn collective_trajectories_stay_in_the_maximal_sector() {
    check(
        (3usize..=5, 0.1f64..0.9, any::<u64>()),
        |(n, s_inv, seed)| {
            let sp = spec(n, 3, Space::Full);
            let model =
                DaviesModel::new(&sp, &BathSpec::collective().with_eta(1e-2), None).unwrap();
            let psi = PureState::dicke(sp.representation(), 1).unwrap();
            let path = AnnealPath::reverse(10.0, s_inv).unwrap();
            let samples = run_samples(
                &model,
                &path,
                &psi,
                &McwfOptions {
                    trajectories: 16,
                    dt: 0.02,
                    seed,
                    chunk: 16,
                },
            )
            .unwrap();
            for x in samples {
                prop_assert!((x.top_sector - 1.0).abs() < 1e-8);
            }
            Ok(())
        },
    );
}

pub fn gap_closes_with_n() {
    let gaps: Vec<f64> = (4..=12)
        .map(|n| min_gap_scan(&spec(n, 3, Space::Dicke), 1e-3).unwrap().gap)
        .collect();
    for w in gaps.windows(2) {
        assert!(w[1] < w[0], "{gaps:?}");
    }
}

pub fn dicke_and_full_space_agree_for_symmetric_states() {
    for n in 2..=6 {
        let p = 3.min(n as u32);
        let (d, f) = (spec(n, p, Space::Dicke), spec(n, p, Space::Full));
        let path = AnnealPath::reverse_paused(8.0, 0.35, 2.0).unwrap();
        for w in [0, 1, n / 2] {
            let a = evolve_unitary(
                &d,
                &path,
                &PureState::dicke(d.representation(), w).unwrap(),
                1e-11,
            )
            .unwrap();
            let b = evolve_unitary(
                &f,
                &path,
                &PureState::dicke(f.representation(), w).unwrap(),
                1e-11,
            )
            .unwrap();
            for (i, x) in a.state.amplitudes.iter().enumerate() {
                let y = b.state.amplitudes[f.representation().symmetric_index(i)];
                assert!((x - y).norm() < 1e-8, "n={n} w={w} i={i}");
            }
            let rest: f64 = b.state.amplitudes[n + 1..]
                .iter()
                .map(|z| z.norm_sqr())
                .sum();
            assert!(rest < 1e-20);
        }
        let bath = BathSpec::collective().with_eta(1e-2);
        let (md, mf) = (
            DaviesModel::new(&d, &bath, None).unwrap(),
            DaviesModel::new(&f, &bath, None).unwrap(),
        );
        let rd = DensityState::from_pure(&md, &PureState::dicke(d.representation(), 1).unwrap())
            .unwrap();
        let rf = DensityState::from_pure(&mf, &PureState::dicke(f.representation(), 1).unwrap())
            .unwrap();
        let opts = OracleOptions {
            tol: 1e-11,
            check_every: 50,
        };
        let od = lindblad_oracle(&md, &path, &rd, &opts).unwrap();
        let of = lindblad_oracle(&mf, &path, &rf, &opts).unwrap();
        assert!(
            (&od.state.blocks[0] - &of.state.blocks[0]).camax() < 1e-8,
            "n={n}"
        );
    }
}

pub fn initial_energy_is_the_exact_eigenvalue() {
    for n in [5, 12, 20] {
        let sp = spec(n, 3, Space::Dicke);
        let h = sp.build_h(1.0).unwrap();
        let d = decompose(&sp, 1.0).unwrap();
        for w in 0..=n {
            let e = h[(w, w)];
            assert!(d.energies.iter().any(|x| (x - e).abs() < 1e-10));
            let row_off: f64 = (0..=n).filter(|&j| j != w).map(|j| h[(w, j)].abs()).sum();
            assert_eq!(row_off, 0.0);
        }
    }
}

pub fn slow_return_above_the_gap_is_adiabatic() {
    let sp = spec(8, 3, Space::Dicke);
    let scan = min_gap_scan(&sp, 1e-3).unwrap();
    let s_inv = scan.s_min + 0.3;
    for w in [1, 2] {
        let path = AnnealPath::reverse(400.0, s_inv).unwrap();
        let out = evolve_unitary(
            &sp,
            &path,
            &PureState::dicke(sp.representation(), w).unwrap(),
            1e-9,
        )
        .unwrap();
        let stay = out.state.amplitudes[w].norm_sqr();
        assert!(stay > 0.99, "w={w}: {stay}");
    }
}

pub fn ensembles_do_not_depend_on_chunking() {
    let sp = spec(4, 3, Space::Full);
    let model = DaviesModel::new(&sp, &BathSpec::independent().with_eta(1e-2), None).unwrap();
    let psi = PureState::dicke(sp.representation(), 1).unwrap();
    let path = AnnealPath::reverse(5.0, 0.5).unwrap();
    let base = McwfOptions {
        trajectories: 40,
        dt: 0.01,
        seed: 99,
        chunk: 40,
    };
    let a = run_samples(&model, &path, &psi, &base).unwrap();
    let b = run_samples(&model, &path, &psi, &McwfOptions { chunk: 7, ..base }).unwrap();
    assert_eq!(a, b);
    let c = run_samples(&model, &path, &psi, &McwfOptions { seed: 100, ..base }).unwrap();
    assert_ne!(a, c);
}

/// Every check, by name.
pub const ALL: &[(&str, fn())] = &[
    ("hamiltonian_is_hermitian", hamiltonian_is_hermitian),
    ("su2_commutator_and_casimir", su2_commutator_and_casimir),
    ("schedule_is_continuous", schedule_is_continuous),
    (
        "forward_path_is_the_identity_line",
        forward_path_is_the_identity_line,
    ),
    (
        "reverse_path_visits_each_value_twice",
        reverse_path_visits_each_value_twice,
    ),
    ("ground_energy_is_variational", ground_energy_is_variational),
    ("odd_p_gap_is_positive", odd_p_gap_is_positive),
    ("unitary_norm_is_preserved", unitary_norm_is_preserved),
    ("kms_balance", kms_balance),
    (
        "decay_part_is_negative_semidefinite",
        decay_part_is_negative_semidefinite,
    ),
    (
        "oracle_preserves_trace_and_positivity",
        oracle_preserves_trace_and_positivity,
    ),
    ("gibbs_state_is_stationary", gibbs_state_is_stationary),
    (
        "collective_trajectories_stay_in_the_maximal_sector",
        collective_trajectories_stay_in_the_maximal_sector,
    ),
    ("gap_closes_with_n", gap_closes_with_n),
    (
        "dicke_and_full_space_agree_for_symmetric_states",
        dicke_and_full_space_agree_for_symmetric_states,
    ),
    (
        "initial_energy_is_the_exact_eigenvalue",
        initial_energy_is_the_exact_eigenvalue,
    ),
    (
        "slow_return_above_the_gap_is_adiabatic",
        slow_return_above_the_gap_is_adiabatic,
    ),
    (
        "ensembles_do_not_depend_on_chunking",
        ensembles_do_not_depend_on_chunking,
    ),
];
