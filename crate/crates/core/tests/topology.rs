use fairsample::circuit::{Circuit, Gate, GateKind};
use fairsample::gmqaoa::Architecture;
use fairsample::topology::*;
use proptest::prelude::*;
use std::collections::BTreeSet;

const H7: &[(usize, usize)] = &[(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)];

const G16: &[(usize, usize)] = &[
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
];

const F27: &[(usize, usize)] = &[
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7), (7, 10), (8, 9),
    (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14), (14, 16), (15, 18), (16, 19), (17, 18),
    (18, 21), (19, 20), (19, 22), (21, 23), (22, 25), (23, 24), (24, 25), (25, 26),
];

/// Counts injective edge-preserving maps by trying every ordered tuple of qubits.
fn brute_force(qubits: usize, edges: &[(usize, usize)], arch: &Architecture) -> usize {
    let coupled: BTreeSet<(usize, usize)> = edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let k = arch.wires;
    let mut tuple = vec![0usize; k];
    let mut count = 0;
    loop {
        let distinct = tuple.iter().collect::<BTreeSet<_>>().len() == k;
        if distinct && arch.edges.iter().all(|&(a, b)| coupled.contains(&(tuple[a], tuple[b]))) {
            count += 1;
        }
        let mut i = 0;
        while i < k {
            tuple[i] += 1;
            if tuple[i] < qubits {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
        if i == k {
            return count;
        }
    }
}

fn default_counts(b: &BackendTopology) -> Vec<usize> {
    Architecture::NAMES
        .iter()
        .map(|n| enumerate_embeddings(b, &Architecture::named(n).unwrap(), EmbeddingConvention::UnorderedPairs).len())
        .collect()
}

#[test]
fn bundled_counts() {
    let line = BackendTopology::bundled("line5").unwrap();
    let tee = BackendTopology::bundled("tee5").unwrap();
    assert_eq!(default_counts(&line), vec![4, 6, 4, 0, 0]);
    assert_eq!(default_counts(&tee), vec![4, 8, 4, 6, 2]);
    let pair = BackendTopology::from_edges("pair", 2, &[(0, 1)]);
    assert_eq!(default_counts(&pair)[0], 1);
}

#[test]
fn heavy_hex_counts() {
    for (edges, n, want) in [
        (H7, 7, [6, 14, 8, 12, 4]),
        (G16, 16, [16, 40, 40, 24, 16]),
        (F27, 27, [28, 74, 80, 48, 36]),
    ] {
        let b = BackendTopology::from_edges("hh", n, edges);
        assert_eq!(default_counts(&b), want.to_vec(), "{n} qubits");
    }
}

#[test]
fn enumeration_matches_brute_force() {
    for (edges, n) in [(&[(0, 1), (1, 2), (2, 3), (3, 4)][..], 5), (&[(0, 1), (1, 2), (1, 3), (3, 4)][..], 5), (H7, 7), (G16, 16)] {
        let b = BackendTopology::from_edges("x", n, edges);
        for name in Architecture::NAMES {
            let a = Architecture::named(name).unwrap();
            let all = enumerate_embeddings(&b, &a, EmbeddingConvention::AllMaps);
            assert_eq!(all.len(), brute_force(n, edges, &a), "{name} on {n}");
            let table = enumerate_embeddings(&b, &a, EmbeddingConvention::UnorderedPairs).len();
            assert_eq!(if name == "2L" { table * 2 } else { table }, all.len());
            let adj = b.adjacency();
            for e in &all {
                assert_eq!(e.mapping.iter().collect::<BTreeSet<_>>().len(), a.wires);
                assert!(a.edges.iter().all(|&(x, y)| adj[e.mapping[x]].contains(&e.mapping[y])));
            }
        }
    }
}

#[test]
fn isolated_qubit_changes_nothing() {
    let tee = BackendTopology::bundled("tee5").unwrap();
    let mut wider = BackendTopology::from_edges("wider", 6, &tee.edges);
    assert_eq!(default_counts(&wider), default_counts(&tee));
    wider.qubit_count = 9;
    assert_eq!(default_counts(&wider), default_counts(&tee));
}

fn calibrated(gate_e: f64, m: f64) -> BackendTopology {
    let mut b = BackendTopology::from_edges("cal", 2, &[(0, 1)]);
    b.gate_errors.push(GateError { gate: GateKind::Cnot, qubits: vec![0, 1], e: gate_e });
    b.readout_errors = (0..2).map(|q| QubitReadout { q, p01: m, p10: m }).collect();
    b
}

fn one_cnot() -> (Circuit, Embedding) {
    let c = Circuit::from_gates(2, [Gate::cnot(0, 1)]).unwrap();
    let e = Embedding { architecture: Architecture::named("2L").unwrap(), mapping: vec![0, 1] };
    (c, e)
}

#[test]
fn aggregate_error_examples() {
    let (c, e) = one_cnot();
    assert_eq!(aggregate_error(&c, &e, &calibrated(0.0, 0.0)).unwrap(), 0.0);
    let x = aggregate_error(&c, &e, &calibrated(0.01, 0.02)).unwrap();
    assert!((x - 0.049204).abs() < 1e-12);
    assert_eq!(aggregate_error(&c, &e, &calibrated(1.0, 0.02)).unwrap(), 1.0);

    let flipped = Embedding { mapping: vec![1, 0], ..e.clone() };
    assert!((aggregate_error(&c, &flipped, &calibrated(0.01, 0.02)).unwrap() - 0.049204).abs() < 1e-12);

    let bare = BackendTopology::from_edges("bare", 2, &[(0, 1)]);
    assert!(matches!(
        aggregate_error(&c, &e, &bare),
        Err(TopologyError::MissingGateError { .. })
    ));
}

#[test]
fn backend_json_round_trip() {
    let b = calibrated(0.01, 0.02);
    let v: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
    assert_eq!(v["qubits"], 2);
    assert_eq!(v["gate_errors"][0]["gate"], "cx");
    assert_eq!(BackendTopology::from_json(&b.to_json()).unwrap(), b);
    assert!(BackendTopology::from_json(r#"{"name":"x","qubits":2,"edges":[[0,5]]}"#).is_err());
}

#[test]
fn backend_noise_uses_calibration() {
    let (c, e) = one_cnot();
    let noise = noise_from_backend(&c, &e, &calibrated(0.01, 0.02), 7).unwrap();
    assert!((aggregate_error_of_noise(&c, &noise) - 0.049204).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn aggregate_error_is_monotone(e in 0.0f64..1.0, m in 0.0f64..1.0, de in 0.0f64..1.0, dm in 0.0f64..1.0) {
        let (c, emb) = one_cnot();
        let base = aggregate_error(&c, &emb, &calibrated(e, m)).unwrap();
        let worse = aggregate_error(&c, &emb, &calibrated(e + (1.0 - e) * de, m + (1.0 - m) * dm)).unwrap();
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(worse >= base - 1e-15);
    }
}
