mod common;

use geoc::dataio::{decode_binary, encode_binary, encode_csv, parse_csv};
use geoc::geodesic::all_pairs_geodesic;
use geoc::metrics::matthews_corr;
use geoc::neighbors::build_knn_graph;
use geoc::pipeline::{FittedReducer, ReducerSpec};
use geoc::{EmbeddingDataset, IsomapModel, NeighborGraph, PcaModel};
use ndarray::Array2;
use proptest::prelude::*;

/// Rows of f32-representable values, so binary round trips are exact.
fn dataset(max_n: usize, max_d: usize) -> impl Strategy<Value = EmbeddingDataset> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-1e3f32..1e3f32, n * d),
            prop::option::of(prop::collection::vec(0u8..2, n)),
        )
            .prop_map(move |(v, labels)| {
                let vectors = Array2::from_shape_fn((n, d), |(i, j)| v[i * d + j] as f64);
                EmbeddingDataset::new(vectors, labels, None).unwrap()
            })
    })
}

/// Gaussian points (distinct with probability one), `min_n..=max_n` rows.
fn cloud(min_n: usize, max_n: usize, d: usize) -> impl Strategy<Value = EmbeddingDataset> {
    (min_n..=max_n, any::<u64>()).prop_map(move |(n, seed)| {
        let mut rng = geoc::rng::SplitMix64::new(seed);
        EmbeddingDataset::unlabeled(common::to_array(&common::gaussian_rows(n, d, &mut rng)))
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn binary_round_trip_is_exact(ds in dataset(40, 24)) {
        let back = decode_binary(&encode_binary(&ds)).unwrap();
        prop_assert_eq!(back.vectors(), ds.vectors());
        prop_assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn csv_round_trip_within_tolerance(ds in dataset(40, 24)) {
        let back = parse_csv(&encode_csv(&ds).unwrap()).unwrap();
        for (a, b) in back.vectors().iter().zip(ds.vectors()) {
            prop_assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
        }
        prop_assert_eq!(back.labels(), ds.labels());
    }

    #[test]
    fn truncated_binary_is_rejected(ds in dataset(10, 8), cut in 1usize..64) {
        let bytes = encode_binary(&ds);
        let cut = cut.min(bytes.len());
        prop_assert!(decode_binary(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn knn_graph_is_symmetric_connected_and_exact(ds in cloud(4, 40, 3), k in 1usize..6) {
        let k = k.min(ds.n() - 1);
        let g = build_knn_graph(&ds, k).unwrap();
        prop_assert!(g.is_connected());
        let rows: Vec<Vec<f64>> = ds.vectors().outer_iter().map(|r| r.to_vec()).collect();
        for i in 0..g.n() {
            prop_assert!(g.degree(i) >= k);
            for &(j, w) in g.neighbors(i) {
                prop_assert_eq!(g.weight(j, i), Some(w));
                prop_assert!((w - common::dist(&rows[i], &rows[j])).abs() <= 1e-9);
            }
            // the k nearest by brute force are all adjacent
            let mut order: Vec<usize> = (0..g.n()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                common::dist(&rows[i], &rows[a]).total_cmp(&common::dist(&rows[i], &rows[b])).then(a.cmp(&b))
            });
            for &j in &order[..k] {
                prop_assert!(g.weight(i, j).is_some());
            }
        }
    }

    #[test]
    fn geodesics_are_a_metric_dominating_euclidean(ds in cloud(4, 30, 3), k in 1usize..5) {
        let g = build_knn_graph(&ds, k.min(ds.n() - 1)).unwrap();
        let geo = all_pairs_geodesic(&g).unwrap();
        let rows: Vec<Vec<f64>> = ds.vectors().outer_iter().map(|r| r.to_vec()).collect();
        let n = ds.n();
        for i in 0..n {
            prop_assert_eq!(geo.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(geo.get(i, j), geo.get(j, i));
                prop_assert!(geo.get(i, j) >= common::dist(&rows[i], &rows[j]) - 1e-9);
                for l in 0..n {
                    prop_assert!(geo.get(i, j) <= geo.get(i, l) + geo.get(l, j) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn adding_an_edge_never_lengthens_a_path(
        n in 3usize..25,
        seed in any::<u64>(),
        a in any::<prop::sample::Index>(),
        b in any::<prop::sample::Index>(),
        w in 0.1f64..10.0,
    ) {
        let mut rng = geoc::rng::SplitMix64::new(seed);
        let mut edges = common::random_connected_graph(n, n / 2, &mut rng);
        let before = all_pairs_geodesic(&NeighborGraph::from_edges(n, 1, &edges).unwrap()).unwrap();
        let (a, b) = (a.index(n), b.index(n));
        prop_assume!(a != b && !edges.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)));
        edges.push((a, b, w));
        let after = all_pairs_geodesic(&NeighborGraph::from_edges(n, 1, &edges).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(after.get(i, j) <= before.get(i, j));
            }
        }
    }

    #[test]
    fn matthews_is_symmetric_in_its_arguments(
        pairs in prop::collection::vec((0u8..2, 0u8..2), 1..100),
    ) {
        let (p, y): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let m = matthews_corr(&p, &y).unwrap();
        prop_assert_eq!(m, matthews_corr(&y, &p).unwrap());
        prop_assert!((-1.0..=1.0).contains(&m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn pca_ignores_row_order(ds in cloud(4, 30, 6), seed in any::<u64>(), m in 1usize..4) {
        let mut perm: Vec<usize> = (0..ds.n()).collect();
        geoc::rng::SplitMix64::new(seed).shuffle(&mut perm);
        let shuffled = ds.select_rows(&perm).unwrap();
        let a = PcaModel::fit(&ds, m).unwrap();
        let b = PcaModel::fit(&shuffled, m).unwrap();
        for (x, y) in a.explained_variance().iter().zip(b.explained_variance()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
        let pa = a.transform(&ds).unwrap();
        let pb = b.transform(&ds).unwrap();
        // components agree up to sign
        for c in 0..m {
            let dot: f64 = (0..ds.n()).map(|i| pa.vectors()[[i, c]] * pb.vectors()[[i, c]]).sum();
            let sign = dot.signum();
            for i in 0..ds.n() {
                prop_assert!((pa.vectors()[[i, c]] - sign * pb.vectors()[[i, c]]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn isomap_ignores_translation(ds in cloud(8, 30, 3), shift in prop::array::uniform3(-50.0f64..50.0)) {
        let moved = ds.with_vectors(ds.vectors() + &ndarray::arr1(&shift)).unwrap();
        let a = IsomapModel::fit(&ds, 2, 5).unwrap();
        let b = IsomapModel::fit(&moved, 2, 5).unwrap();
        let (ea, eb) = (a.training_embedding(), b.training_embedding());
        for (x, y) in ea.iter().zip(eb.iter()) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn reducer_transform_is_pure(ds in cloud(8, 40, 5)) {
        let spec = ReducerSpec::concat(1, 2, 4);
        let r = FittedReducer::fit(&spec, &ds).unwrap();
        let once = r.transform(&ds).unwrap();
        let twice = r.transform(&ds).unwrap();
        prop_assert_eq!(once.vectors(), twice.vectors());
        let back = FittedReducer::from_bytes(&r.to_bytes()).unwrap();
        let again = back.transform(&ds).unwrap();
        prop_assert_eq!(again.vectors(), once.vectors());
    }
}
