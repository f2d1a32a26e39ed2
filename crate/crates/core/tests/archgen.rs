use featuregrid::archgen::{
    allocate, classify_shape, default_vgg16_template, is_valid, realize, reference_widths,
    FeatureAllocation, RealizedKind, Shape, ShapeClass,
};
use featuregrid::skewnorm::{bin_masses_with, BinConvention, SkewNormalParams};
use proptest::prelude::*;

const PARAMS: SkewNormalParams = SkewNormalParams {
    xi: 16.0,
    omega: 4.0,
    alpha: -40.0,
};

/// VGG-D at 32x32x3 with 10 classes, one row per weight layer:
/// (c_in, c_out, spatial size at which the conv runs).
const VGG_D_CONVS: [(u64, u64, u64); 13] = [
    (3, 64, 32),
    (64, 64, 32),
    (64, 128, 16),
    (128, 128, 16),
    (128, 256, 8),
    (256, 256, 8),
    (256, 256, 8),
    (256, 512, 4),
    (512, 512, 4),
    (512, 512, 4),
    (512, 512, 2),
    (512, 512, 2),
    (512, 512, 2),
];
const VGG_D_DENSE: [(u64, u64); 4] = [(512, 4096), (4096, 4096), (4096, 4096), (4096, 10)];

// Hand-tabulated per-layer parameters (weights + bias + 2 batch-norm for
// conv; weights + bias for dense).
const VGG_D_LAYER_PARAMS: [u64; 17] = [
    1_920, 37_056, 74_112, 147_840, 295_680, 590_592, 590_592, 1_181_184, 2_360_832, 2_360_832,
    2_360_832, 2_360_832, 2_360_832, 2_101_248, 16_781_312, 16_781_312, 40_970,
];
const VGG_D_TOTAL_PARAMS: u64 = 50_427_978;
const VGG_D_TOTAL_FLOPS: u64 = 697_778_176;

fn vgg_allocation() -> FeatureAllocation {
    let widths = reference_widths(&default_vgg16_template()).unwrap();
    FeatureAllocation::from_counts(widths, 16512).unwrap()
}

#[test]
fn vgg_d_oracle_table_is_self_consistent() {
    let conv: Vec<u64> = VGG_D_CONVS
        .iter()
        .map(|&(i, o, _)| 9 * i * o + 3 * o)
        .collect();
    let dense: Vec<u64> = VGG_D_DENSE.iter().map(|&(i, o)| i * o + o).collect();
    let table: Vec<u64> = conv.into_iter().chain(dense).collect();
    assert_eq!(table, VGG_D_LAYER_PARAMS);
    assert_eq!(VGG_D_LAYER_PARAMS.iter().sum::<u64>(), VGG_D_TOTAL_PARAMS);
    let flops: u64 = VGG_D_CONVS
        .iter()
        .map(|&(i, o, s)| 18 * i * o * s * s)
        .sum::<u64>()
        + VGG_D_DENSE.iter().map(|&(i, o)| 2 * i * o).sum::<u64>();
    assert_eq!(flops, VGG_D_TOTAL_FLOPS);
}

#[test]
fn vgg_d_parameter_count_matches_oracle_exactly() {
    let spec = realize(&default_vgg16_template(), &PARAMS, &vgg_allocation()).unwrap();
    let per_layer: Vec<u64> = spec.layers.iter().map(|l| l.parameters).collect();
    assert_eq!(per_layer, VGG_D_LAYER_PARAMS);
    assert_eq!(spec.parameter_count, VGG_D_TOTAL_PARAMS);
    assert_eq!(spec.flop_count, VGG_D_TOTAL_FLOPS);
    assert_eq!(classify_shape(&spec.allocation), ShapeClass::Increasing);
}

fn shapes_chain(layers: &[featuregrid::archgen::LayerRecord]) -> bool {
    layers.windows(2).all(|w| w[0].output == w[1].input)
}

fn arbitrary_counts() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..5000, 16)
}

proptest! {
    #[test]
    fn shape_chain_is_consistent(counts in arbitrary_counts()) {
        let alloc = FeatureAllocation::from_counts(counts.clone(), 16512).unwrap();
        let spec = realize(&default_vgg16_template(), &PARAMS, &alloc).unwrap();
        prop_assert!(shapes_chain(&spec.layers));
        prop_assert_eq!(spec.layers.len(), 17);
        prop_assert_eq!(spec.layers[0].input, Shape::Spatial { height: 32, width: 32, channels: 3 });
        prop_assert_eq!(spec.layers[16].output, Shape::Units { units: 10 });
        prop_assert_eq!(spec.layers[16].kind, RealizedKind::Classifier);
        prop_assert!(spec.parameter_count > 0);
        for (layer, &c) in spec.layers.iter().zip(&counts) {
            let out = match layer.output {
                Shape::Spatial { channels, .. } => channels,
                Shape::Units { units } => units,
            };
            prop_assert_eq!(out, c);
        }
    }

    #[test]
    fn adding_a_feature_increases_parameters(counts in arbitrary_counts(), slot in 0usize..16) {
        let template = default_vgg16_template();
        let base = FeatureAllocation::from_counts(counts.clone(), 16512).unwrap();
        let mut bumped_counts = counts;
        bumped_counts[slot] += 1;
        let bumped = FeatureAllocation::from_counts(bumped_counts, 16512).unwrap();
        let before = realize(&template, &PARAMS, &base).unwrap().parameter_count;
        let after = realize(&template, &PARAMS, &bumped).unwrap().parameter_count;
        prop_assert!(after > before);
    }

    #[test]
    fn budget_is_conserved_for_valid_allocations(
        xi in 1.0..=16.0f64,
        omega in 0.5..=5.5f64,
        alpha in -40.0..=40.0f64,
        centered in any::<bool>(),
    ) {
        let convention = if centered { BinConvention::Centered } else { BinConvention::LeftClosed };
        let params = SkewNormalParams { xi, omega, alpha };
        let masses = bin_masses_with(&params, 16, 128, convention).unwrap();
        let alloc = allocate(&masses, 16512).unwrap();
        prop_assert!(alloc.counts.iter().all(|&c| c >= 1));
        // rounding moves each bin by at most 0.5; a bin floored from 0 to 1 by at most 1
        let collapsed = alloc.collapsed_layers as f64;
        let upper = 16512.0 * alloc.captured_mass + 0.5 * (16.0 - collapsed) + collapsed;
        prop_assert!(alloc.total() as f64 <= upper + 1e-9, "{:?}", alloc);
        let slack = 0.5 * 16.0;
        if is_valid(&alloc, 0.05) {
            prop_assert!(alloc.total() as f64 <= 16512.0 + slack);
            prop_assert!(alloc.total() as f64 >= 16512.0 * 0.95 - slack);
        }
    }

    #[test]
    fn allocation_is_deterministic(xi in 1.0..=16.0f64, omega in 0.5..=5.5f64, alpha in -40.0..=40.0f64) {
        let template = default_vgg16_template();
        let params = SkewNormalParams { xi, omega, alpha };
        let run = || {
            let masses = bin_masses_with(&params, 16, 128, BinConvention::LeftClosed).unwrap();
            let alloc = allocate(&masses, 16512).unwrap();
            realize(&template, &params, &alloc).unwrap()
        };
        let (a, b) = (run(), run());
        prop_assert_eq!(&a.arch_id, &b.arch_id);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn symmetric_parameters_give_palindromic_counts(omega in 0.5..=5.5f64, centered in any::<bool>()) {
        let convention = if centered { BinConvention::Centered } else { BinConvention::LeftClosed };
        let params = SkewNormalParams { xi: convention.midpoint(16), omega, alpha: 0.0 };
        let masses = bin_masses_with(&params, 16, 128, convention).unwrap();
        let alloc = allocate(&masses, 16512).unwrap();
        for i in 0..16 {
            let (a, b) = (alloc.counts[i] as i64, alloc.counts[15 - i] as i64);
            prop_assert!((a - b).abs() <= 1, "{:?}", alloc.counts);
        }
    }
}

#[test]
fn vgg_like_regime_is_increasing() {
    let template = default_vgg16_template();
    for &(xi, omega, alpha) in &[(16.0, 4.0, -40.0), (16.0, 3.0, 0.0)] {
        let params = SkewNormalParams { xi, omega, alpha };
        let masses = bin_masses_with(&params, 16, 128, BinConvention::LeftClosed).unwrap();
        let alloc = allocate(&masses, 16512).unwrap();
        assert_eq!(classify_shape(&alloc), ShapeClass::Increasing, "{params:?}");
        realize(&template, &params, &alloc).unwrap();
    }
    // (16, 4, -40) is a valid grid member with a 2-feature first layer
    let params = SkewNormalParams {
        xi: 16.0,
        omega: 4.0,
        alpha: -40.0,
    };
    let masses = bin_masses_with(&params, 16, 128, BinConvention::LeftClosed).unwrap();
    let alloc = allocate(&masses, 16512).unwrap();
    assert!(is_valid(&alloc, 0.05));
    assert_eq!(alloc.counts[0], 2);
}

#[test]
fn late_peak_with_strong_left_skew_lands_in_dense_slots() {
    // (16, 3, -10): maximum sits in the fully-connected slots; the last bin
    // is slightly below its neighbour, so the strict profile is "peaked".
    let params = SkewNormalParams {
        xi: 16.0,
        omega: 3.0,
        alpha: -10.0,
    };
    for convention in [BinConvention::LeftClosed, BinConvention::Centered] {
        let masses = bin_masses_with(&params, 16, 128, convention).unwrap();
        let alloc = allocate(&masses, 16512).unwrap();
        let argmax = (0..16).max_by_key(|&i| alloc.counts[i]).unwrap();
        assert!(argmax >= 13, "{convention:?}: {:?}", alloc.counts);
        assert!(alloc.counts[..argmax].windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(classify_shape(&alloc), ShapeClass::Peaked);
    }
}
