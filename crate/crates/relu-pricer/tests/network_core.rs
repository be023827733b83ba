mod common;

use proptest::prelude::*;

use relu_pricer::calculus::{identity_net, zero_net};
use relu_pricer::network::{deserialize, make_network, measure, realize, serialize};
use relu_pricer::primitives::square_net;
use relu_pricer::{AffineLayer, Error, NeuralNetwork};

fn dense(rows: usize, cols: usize, w: &[f64], b: &[f64]) -> AffineLayer {
    AffineLayer::from_dense(rows, cols, w, b.to_vec()).unwrap()
}

/// The two-layer identity on ℝ written out by hand: `t ↦ ρ(t) − ρ(−t)`.
fn hand_identity() -> NeuralNetwork {
    make_network(vec![dense(2, 1, &[1.0, -1.0], &[0.0, 0.0]), dense(1, 2, &[1.0, -1.0], &[0.0])]).unwrap()
}

#[test]
fn single_affine_layer() {
    let net = make_network(vec![dense(1, 1, &[2.0], &[1.0])]).unwrap();
    let m = measure(&net);
    assert_eq!((m.depth, m.dim_in, m.dim_out), (1, 1, 1));
    assert_eq!(realize(&net, &[3.0]).unwrap(), vec![7.0]);
    // No activation on a single layer, so negative outputs survive.
    assert_eq!(realize(&net, &[-3.0]).unwrap(), vec![-5.0]);
}

#[test]
fn incompatible_layers_rejected() {
    let err = make_network(vec![dense(3, 2, &[0.0; 6], &[0.0; 3]), dense(1, 4, &[0.0; 4], &[0.0])]).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch(_)));
    assert!(matches!(make_network(vec![]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn non_finite_weight_rejected() {
    let nan = AffineLayer::from_dense(1, 1, &[f64::NAN], vec![0.0]).unwrap();
    assert_eq!(make_network(vec![nan]), Err(Error::NonFiniteWeight { layer: 0 }));
    let inf = AffineLayer::from_dense(1, 1, &[1.0], vec![f64::INFINITY]).unwrap();
    let ok = dense(1, 1, &[1.0], &[0.0]);
    assert_eq!(make_network(vec![ok, inf]), Err(Error::NonFiniteWeight { layer: 1 }));
}

#[test]
fn hand_identity_matches_builder() {
    let hand = hand_identity();
    let built = identity_net(1, 2);
    assert_eq!(hand.metrics(), built.metrics());
    let m = measure(&hand);
    assert_eq!((m.depth, m.size), (2, 4));
    assert_eq!(m.per_layer_sizes, vec![2, 2]);
    assert_eq!((hand.dim_in(), hand.layers()[0].rows(), hand.dim_out()), (1, 2, 1));
    assert_eq!(realize(&hand, &[-0.7]).unwrap(), vec![-0.7]);
    assert_eq!(realize(&built, &[-0.7]).unwrap(), vec![-0.7]);
}

#[test]
fn zero_network_has_no_weights() {
    let theta = make_network(vec![dense(1, 1, &[0.0], &[0.0])]).unwrap();
    let m = measure(&theta);
    assert_eq!((m.depth, m.size), (1, 0));
    assert_eq!(zero_net(3).size(), 0);
    assert_eq!(square_net(1.0).unwrap().size(), 0);
    assert_eq!(square_net(4.0).unwrap().size(), 0);
}

#[test]
fn square_net_at_dyadic_node() {
    // φ_2 interpolates t² at multiples of 1/2.
    let net = square_net(2f64.powi(-4)).unwrap();
    assert_eq!(net.depth(), 2);
    assert_eq!(net.realize_scalar(&[0.5]).unwrap(), 0.25);
}

#[test]
fn realize_checks_input_length() {
    let net = identity_net(2, 2);
    assert!(matches!(net.realize(&[1.0]), Err(Error::DimensionMismatch(_))));
    assert!(matches!(net.realize(&[1.0, 2.0, 3.0]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn round_trip_identity() {
    let net = hand_identity();
    let back = deserialize(&serialize(&net)).unwrap();
    assert_eq!(back, net);
    assert_eq!(measure(&back), measure(&net));
}

#[test]
fn tiny_bias_survives_round_trip() {
    let net = make_network(vec![dense(1, 2, &[5e-324, -1.0 / 3.0], &[1e-300])]).unwrap();
    let back = deserialize(&serialize(&net)).unwrap();
    assert_eq!(back.layers()[0].bias()[0].to_bits(), 1e-300f64.to_bits());
    assert_eq!(back.layers()[0].weight(0, 0).to_bits(), 5e-324f64.to_bits());
    assert_eq!(back.layers()[0].weight(0, 1).to_bits(), (-1.0f64 / 3.0).to_bits());
}

#[test]
fn malformed_documents() {
    let bytes = serialize(&hand_identity());
    let cut = &bytes[..bytes.len() / 2];
    assert!(matches!(deserialize(cut), Err(Error::ParseError(_))));
    let text = String::from_utf8(bytes).unwrap().replace("\"version\":1", "\"version\":2");
    assert_eq!(deserialize(text.as_bytes()), Err(Error::SchemaVersionMismatch { found: 2, expected: 1 }));
    let doc = r#"{"version":1,"layers":[{"rows":1,"cols":2,"weights":[1.0],"bias":[0.0]}]}"#;
    assert!(deserialize(doc.as_bytes()).is_err());
}

#[test]
fn documented_schema_is_accepted() {
    let doc = r#"{"version":1,"layers":[
        {"rows":2,"cols":1,"weights":[1,-1],"bias":[0,0]},
        {"rows":1,"cols":2,"weights":[1,-1],"bias":[0]}]}"#;
    assert_eq!(deserialize(doc.as_bytes()).unwrap(), hand_identity());
}

#[test]
fn sparse_layout_round_trip() {
    // Wide enough that the sparse layout is used for the first layer.
    let d = 1100;
    let net = identity_net(d, 2);
    assert!(net.layers()[0].rows() * net.layers()[0].cols() > relu_pricer::network::DENSE_ENTRY_LIMIT);
    let bytes = serialize(&net);
    assert!(String::from_utf8_lossy(&bytes).contains("row_ptr"));
    assert_eq!(deserialize(&bytes).unwrap(), net);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relu_split_is_exact(y in prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        (-1e-300..1e-300f64),
        (0u64..(1u64 << 52)).prop_map(f64::from_bits),
        (0u64..(1u64 << 52)).prop_map(|b| -f64::from_bits(b)),
    ]) {
        let relu = |t: f64| t.max(0.0);
        prop_assert_eq!(relu(y) - relu(-y), y);
        prop_assert_eq!(identity_net(1, 3).realize_scalar(&[y]).unwrap().to_bits(), (y + 0.0).to_bits());
    }

    #[test]
    fn single_layer_is_affine(net in common::net(3, 2, 1), x in common::point(3)) {
        let layer = &net.layers()[0];
        let y = net.realize(&x).unwrap();
        for (r, yr) in y.iter().enumerate() {
            let mut acc = layer.bias()[r];
            for (c, xc) in x.iter().enumerate() {
                acc += layer.weight(r, c) * xc;
            }
            prop_assert!((yr - acc).abs() <= 1e-15 * (1.0 + acc.abs()));
        }
    }

    #[test]
    fn realize_is_deterministic(net in common::any_net(4), seed in any::<u64>()) {
        let x: Vec<f64> = (0..net.dim_in()).map(|i| ((seed >> (i * 8)) & 0xff) as f64 / 64.0 - 2.0).collect();
        let a = net.realize(&x).unwrap();
        let b = net.realize(&x).unwrap();
        prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert!(a.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn round_trip_is_bit_exact(net in common::any_net(4)) {
        let back = deserialize(&serialize(&net)).unwrap();
        prop_assert_eq!(measure(&back), measure(&net));
        for (l, m) in net.layers().iter().zip(back.layers()) {
            prop_assert_eq!(l.to_dense().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            m.to_dense().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(l.bias().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            m.bias().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn metrics_are_consistent(net in common::any_net(5)) {
        let m = measure(&net);
        prop_assert_eq!(m.per_layer_sizes.len(), m.depth);
        prop_assert_eq!(m.per_layer_sizes.iter().sum::<usize>(), m.size);
        let counted: usize = net.layers().iter()
            .map(|l| l.to_dense().iter().chain(l.bias()).filter(|v| **v != 0.0).count())
            .sum();
        prop_assert_eq!(counted, m.size);
    }

    #[test]
    fn batch_matches_pointwise(net in common::net(2, 2, 3), xs in prop::collection::vec(common::point(2), 1..20)) {
        let batch = net.realize_batch(&xs).unwrap();
        let seq = net.realize_batch_seq(&xs).unwrap();
        prop_assert_eq!(&batch, &seq);
        for (x, y) in xs.iter().zip(&batch) {
            prop_assert_eq!(&net.realize(x).unwrap(), y);
        }
    }
}
