use super::*;
use crate::qsim::{equal_up_to_phase, Statevector};
use crate::sampling::Forced;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn a(k: i64) -> Angle {
    Angle::new(k)
}

/// Independent reference: a linear cluster measured at φ_0..φ_{n−2} applies
/// `H·diag(1, e^{−iφ})` per measured vertex to `|+⟩`.
fn circuit_oracle(phis: &[Angle]) -> Distribution {
    let h = FRAC_1_SQRT_2;
    let mut v = [c(h, 0.0), c(h, 0.0)];
    for phi in phis {
        let rotated = [v[0], v[1] * Complex64::from_polar(1.0, -phi.radians())];
        v = [(rotated[0] + rotated[1]) * h, (rotated[0] - rotated[1]) * h];
    }
    let mut d = Distribution::new();
    for (bit, amp) in ["0", "1"].iter().zip(v) {
        if amp.norm_sqr() > 1e-15 {
            d.insert(bit.to_string(), amp.norm_sqr());
        }
    }
    d
}

#[test]
fn linear_cluster_examples() {
    let g = linear_cluster(1).unwrap();
    assert!(g.edges().is_empty());
    assert_eq!(g.outputs(), &[0]);
    let g = linear_cluster(2).unwrap();
    assert_eq!(g.edges(), &[(0, 1)]);
    assert_eq!(g.order(), &[0]);
    assert_eq!(g.outputs(), &[1]);
    assert_eq!(
        linear_cluster(4).unwrap().edges(),
        &[(0, 1), (1, 2), (2, 3)]
    );
    assert_eq!(linear_cluster(0), Err(MbqcError::Empty));
}

#[test]
fn brickwork_examples() {
    for n in 1..10 {
        assert_eq!(brickwork_graph(1, n).unwrap(), linear_cluster(n).unwrap());
    }
    let g = brickwork_graph(2, 1).unwrap();
    assert_eq!(g.num_vertices(), 2);
    assert!(g.edges().is_empty());
    assert_eq!(g.outputs(), &[0, 1]);
    assert!(brickwork_graph(0, 5).is_err());
    assert!(brickwork_graph(3, 0).is_err());
}

#[test]
fn brickwork_matches_independent_construction() {
    // 1-indexed rule: columns j ≡ 3 (mod 8) join odd rows i to i+1, columns
    // j ≡ 7 (mod 8) join even rows; each brick also joins column j+2.
    for (rows, cols) in [(2, 5), (3, 13), (4, 13), (2, 9)] {
        let g = brickwork_graph(rows, cols).unwrap();
        let mut want = std::collections::BTreeSet::new();
        for i in 1..=rows {
            for j in 1..=cols {
                let v = (i - 1) * cols + (j - 1);
                if j < cols {
                    want.insert((v, v + 1));
                }
                let brick = (j % 8 == 3 && i % 2 == 1) || (j % 8 == 7 && i % 2 == 0);
                if brick && i < rows && j + 2 <= cols {
                    want.insert((v, v + cols));
                    want.insert((v + 2, v + 2 + cols));
                }
            }
        }
        let got: std::collections::BTreeSet<_> = g.edges().iter().copied().collect();
        assert_eq!(got, want, "{rows}x{cols}");
        for v in 0..g.num_vertices() {
            assert!(g.degree(v) <= 3);
        }
    }
    assert_eq!(brickwork_graph(2, 5).unwrap().edges().len(), 10);
}

#[test]
fn graph_validation() {
    assert!(GraphSpec::new(2, vec![(0, 0)], vec![0], vec![1]).is_err());
    assert!(GraphSpec::new(2, vec![(0, 2)], vec![0], vec![1]).is_err());
    assert!(GraphSpec::new(2, vec![(0, 1), (1, 0)], vec![0], vec![1]).is_err());
    assert!(GraphSpec::new(3, vec![], vec![0], vec![1]).is_err());
    assert!(GraphSpec::new(2, vec![], vec![0, 1], vec![1]).is_err());
}

#[test]
fn pattern_validation() {
    let g = linear_cluster(3).unwrap();
    let bad_order = Pattern::new(
        Default::default(),
        [(0, [1].into())].into(),
        Default::default(),
    );
    assert!(Computation::new(g.clone(), bad_order).is_err());
    let output_angle = Pattern::default().with_phi(2, a(1));
    assert!(Computation::new(g.clone(), output_angle).is_err());
    assert!(Computation::new(g, Pattern::linear_flow(&[a(1), a(2)])).is_ok());
}

#[test]
fn graph_state_examples() {
    let g = linear_cluster(1).unwrap();
    let s = build_graph_state(&g, &[(0, plus_state(Angle::ZERO))].into()).unwrap();
    assert_eq!(s, plus_state(Angle::ZERO));

    let g = linear_cluster(2).unwrap();
    let states = [(0, plus_state(Angle::ZERO)), (1, plus_state(Angle::ZERO))].into();
    let s = build_graph_state(&g, &states).unwrap();
    let want = [c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)];
    assert!(s
        .amplitudes()
        .iter()
        .zip(want)
        .all(|(x, y)| (x - y).norm() < 1e-12));

    assert_eq!(
        build_graph_state(&g, &[(0, plus_state(Angle::ZERO))].into()),
        Err(MbqcError::MissingVertexState(1))
    );
}

proptest! {
    #[test]
    fn edge_order_is_irrelevant(seed in any::<u64>(), ks in proptest::collection::vec(0i64..8, 6)) {
        let g = brickwork_graph(2, 3).unwrap();
        let states: BTreeMap<usize, Statevector> =
            ks.iter().enumerate().map(|(v, &k)| (v, plus_state(a(k)))).collect();
        let base = build_graph_state(&g, &states).unwrap();
        let mut edges = g.edges().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(edges.as_mut_slice(), &mut rng);
        let shuffled = GraphSpec::new(6, edges, g.order().to_vec(), g.outputs().to_vec()).unwrap();
        prop_assert_eq!(build_graph_state(&shuffled, &states).unwrap(), base);
    }

    #[test]
    fn adapted_angle_without_parity_is_phi(k in 0i64..8, b0 in 0u8..2, b1 in 0u8..2) {
        let outcomes: BTreeMap<usize, u8> = [(0, b0), (1, b1)].into();
        let even_x: std::collections::BTreeSet<usize> = if b0 == 0 { [0].into() } else { Default::default() };
        let even_z: std::collections::BTreeSet<usize> = if b1 == 0 { [1].into() } else { Default::default() };
        prop_assert_eq!(adapted_angle(a(k), &outcomes, &even_x, &even_z).unwrap(), a(k));
    }
}

#[test]
fn adapted_and_delta_examples() {
    let none = Default::default();
    let out: BTreeMap<usize, u8> = [(0, 1), (1, 0)].into();
    assert_eq!(adapted_angle(a(2), &out, &none, &none).unwrap(), a(2));
    assert_eq!(adapted_angle(a(2), &out, &[0].into(), &none).unwrap(), a(6));
    assert_eq!(adapted_angle(a(2), &out, &none, &[0].into()).unwrap(), a(6));
    assert_eq!(
        adapted_angle(a(2), &out, &[7].into(), &none),
        Err(MbqcError::MissingOutcome(7))
    );
    assert_eq!(delta_angle(a(0), a(0), 0), a(0));
    assert_eq!(delta_angle(a(3), a(2), 1), a(1));
    assert_eq!(delta_angle(a(5), a(0), 0), a(5));
}

#[test]
fn two_vertex_run_matches_brute_force() {
    // CZ|++⟩ = ½(1,1,1,−1); project qubit 0 onto (|0⟩ ± |1⟩)/√2 by hand.
    let h = FRAC_1_SQRT_2;
    let comp = Computation::linear(&[a(0)]).unwrap();
    for b0 in 0..2u8 {
        let sign = if b0 == 0 { 1.0 } else { -1.0 };
        let graph = [c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(-0.5, 0.0)];
        // amplitude index = q0 + 2·q1
        let r0 = (graph[0] + graph[1] * sign) * h;
        let r1 = (graph[2] + graph[3] * sign) * h;
        let raw = Statevector::normalized(vec![r0, r1]).unwrap();
        let mut want = raw.clone();
        if b0 == 1 {
            want.apply_x(0).unwrap();
        }
        let rec = run_pattern_direct_with(&comp, &mut Forced(b0 as usize)).unwrap();
        assert_eq!(rec.outcomes[&0], b0);
        assert!(equal_up_to_phase(&rec.output_state, &want, 1e-12).unwrap());
        // the uncorrected branch is the computational state |b0⟩
        let mut basis = Statevector::zero(1);
        if b0 == 1 {
            basis.apply_x(0).unwrap();
        }
        assert!(equal_up_to_phase(&raw, &basis, 1e-12).unwrap());
    }
}

#[test]
fn direct_run_edge_cases() {
    let one = Computation::linear(&[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rec = run_pattern_direct(&one, &mut rng).unwrap();
    assert!(rec.outcomes.is_empty());
    assert_eq!(rec.output_state, plus_state(Angle::ZERO));

    let comp = Computation::linear(&[a(1), a(3), a(6)]).unwrap();
    let r1 = run_pattern_direct(&comp, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    let r2 = run_pattern_direct(&comp, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
    assert_eq!(r1, r2);
}

#[test]
fn output_distribution_examples() {
    let d = output_distribution(&Computation::linear(&[]).unwrap()).unwrap();
    assert!((d["0"] - 0.5).abs() < 1e-12 && (d["1"] - 0.5).abs() < 1e-12);
    let d = output_distribution(&Computation::linear(&[a(0)]).unwrap()).unwrap();
    assert_eq!(d.len(), 1);
    assert!((d["0"] - 1.0).abs() < 1e-12);
    let d = output_distribution(&Computation::linear(&[a(1)]).unwrap()).unwrap();
    let cos2 = (std::f64::consts::PI / 8.0).cos().powi(2);
    assert!((d["0"] - cos2).abs() < 1e-12);

    let big = Computation::new(linear_cluster(13).unwrap(), Pattern::default()).unwrap();
    assert!(matches!(
        output_distribution(&big),
        Err(MbqcError::TooLarge { .. })
    ));
}

#[test]
fn output_distribution_matches_circuit_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..=6 {
        for _ in 0..10 {
            let phis: Vec<Angle> = (0..n - 1)
                .map(|_| a(rand::Rng::random_range(&mut rng, 0..8)))
                .collect();
            let d = output_distribution(&Computation::linear(&phis).unwrap()).unwrap();
            let want = circuit_oracle(&phis);
            assert!(tv(&d, &want) < 1e-9, "{phis:?}: {d:?} vs {want:?}");
            assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

fn tv(a: &Distribution, b: &Distribution) -> f64 {
    crate::stats::tv_distance(a, b)
}

#[test]
fn corrections_make_output_branch_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=5 {
        for _ in 0..8 {
            let phis: Vec<Angle> = (0..n - 1)
                .map(|_| a(rand::Rng::random_range(&mut rng, 0..8)))
                .collect();
            let branches =
                branch_output_distributions(&Computation::linear(&phis).unwrap()).unwrap();
            assert_eq!(branches.len(), 1 << (n - 1));
            let first = &branches[0].2;
            for (outcomes, w, state) in &branches {
                assert!((w - 1.0 / branches.len() as f64).abs() < 1e-12);
                assert!(
                    equal_up_to_phase(state, first, 1e-10).unwrap(),
                    "{phis:?} {outcomes:?}"
                );
            }
        }
    }
}

#[test]
fn sampled_runs_converge_to_exact_distribution() {
    let comp = Computation::linear(&[a(1), a(3), a(5)]).unwrap();
    let exact = output_distribution(&comp).unwrap();
    let mut sampler = crate::sampling::RngSampler(ChaCha8Rng::seed_from_u64(99));
    let mut counts = std::collections::BTreeMap::new();
    let shots = 100_000;
    for _ in 0..shots {
        let rec = run_pattern_direct_with(&comp, &mut sampler).unwrap();
        let bits = sample_output_bits(&rec, &mut sampler).unwrap();
        *counts.entry(bits_to_string(&bits)).or_insert(0u64) += 1;
    }
    assert!(tv(&crate::stats::frequencies(&counts), &exact) <= 0.02);
}

#[test]
fn json_document_roundtrip_and_errors() {
    let text = r#"{"vertices": 3, "edges": [[0,1],[1,2]], "order": [0,1], "outputs": [2],
                   "phi": {"0": 1, "1": 3}, "x_deps": {"1": [0], "2": [1]}, "z_deps": {"2": [0]}}"#;
    let comp = Computation::from_json(text).unwrap();
    assert_eq!(comp, Computation::linear(&[a(1), a(3)]).unwrap());
    assert_eq!(Computation::from_json(&comp.to_json()).unwrap(), comp);
    assert!(Computation::from_json(r#"{"vertices": 2}"#).is_err());
    assert!(Computation::from_json(
        r#"{"vertices": 2, "edges": [], "order": [0], "outputs": [1], "phi": {"0": 9}}"#
    )
    .is_err());
    // the graph alone serializes without any secret angle
    let g = serde_json::to_string(comp.graph()).unwrap();
    assert!(!g.contains("phi"));
}
