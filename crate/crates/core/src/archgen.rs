//! Feature allocation and VGG-style architecture realization.
//!
//! A [`NetworkTemplate`] fixes the functional sequence of a network (which
//! slots are 3x3 convolutions, where pooling happens, which slots are fully
//! connected). The skew normal bin masses decide only how many features each
//! slot receives. A fixed classifier projection to `class_count` outputs is
//! appended after the last slot and never takes part in redistribution.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::skewnorm::{BinMasses, SkewNormalParams};

pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Parameters per feature contributed by batch normalization (scale, shift).
const BATCH_NORM_PARAMS: u64 = 2;

const CONV_KERNEL_AREA: u64 = 9;

/// Original VGG-D widths for the 16 redistributable slots.
const VGG16_WIDTHS: [u64; 16] = [
    64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512, 4096, 4096, 4096,
];

/// Widths for the 10-slot variant: VGG-D's first eight conv widths followed
/// by two hidden fully-connected layers.
const VGG10_WIDTHS: [u64; 10] = [64, 64, 128, 128, 256, 256, 512, 512, 4096, 4096];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv3x3,
    FullyConnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub kind: LayerKind,
    pub pool_after: bool,
}

impl LayerSlot {
    pub const fn conv(pool_after: bool) -> Self {
        LayerSlot {
            kind: LayerKind::Conv3x3,
            pool_after,
        }
    }

    pub const fn fc() -> Self {
        LayerSlot {
            kind: LayerKind::FullyConnected,
            pool_after: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTemplate {
    pub name: String,
    pub slots: Vec<LayerSlot>,
    pub input_height: u64,
    pub input_width: u64,
    pub input_channels: u64,
    pub class_count: u64,
}

impl NetworkTemplate {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn pool_count(&self) -> usize {
        self.slots.iter().filter(|s| s.pool_after).count()
    }

    pub fn conv_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| s.kind == LayerKind::Conv3x3)
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::domain("template has no slots"));
        }
        if self.input_height == 0 || self.input_width == 0 || self.input_channels == 0 {
            return Err(Error::domain("template input dimensions must be positive"));
        }
        if self.class_count == 0 {
            return Err(Error::domain("template class count must be positive"));
        }
        let first_fc = self
            .slots
            .iter()
            .position(|s| s.kind == LayerKind::FullyConnected)
            .unwrap_or(self.slots.len());
        if self.slots[first_fc..]
            .iter()
            .any(|s| s.kind == LayerKind::Conv3x3)
        {
            return Err(Error::domain(
                "convolution slots must precede fully-connected slots",
            ));
        }
        if self.slots[first_fc..].iter().any(|s| s.pool_after) {
            return Err(Error::domain("fully-connected slots cannot pool"));
        }
        // Equivalent to pool_count <= log2(min(height, width)) under floor
        // halving, but names the offending slot.
        let (mut height, mut width) = (self.input_height, self.input_width);
        for (index, slot) in self.slots.iter().enumerate() {
            if slot.pool_after {
                if height < 2 || width < 2 {
                    return Err(Error::ShapeUnderflow {
                        slot: index + 1,
                        height,
                        width,
                    });
                }
                height /= 2;
                width /= 2;
            }
        }
        Ok(())
    }
}

/// The 16-slot VGG-D layout: 13 conv (pooling after 2, 4, 7, 10, 13) and 3
/// fully-connected slots, at 32x32x3 input with 10 classes.
pub fn default_vgg16_template() -> NetworkTemplate {
    let pools = [2, 4, 7, 10, 13];
    let mut slots: Vec<LayerSlot> = (1..=13)
        .map(|i| LayerSlot::conv(pools.contains(&i)))
        .collect();
    slots.extend([LayerSlot::fc(); 3]);
    NetworkTemplate {
        name: "vgg16".into(),
        slots,
        input_height: 32,
        input_width: 32,
        input_channels: 3,
        class_count: 10,
    }
}

/// 10-slot variant: 8 conv (pooling after 2, 4, 6, 8) and 2 fully-connected.
pub fn default_vgg10_template() -> NetworkTemplate {
    let mut slots: Vec<LayerSlot> = (1..=8).map(|i| LayerSlot::conv(i % 2 == 0)).collect();
    slots.extend([LayerSlot::fc(); 2]);
    NetworkTemplate {
        name: "vgg10".into(),
        slots,
        input_height: 32,
        input_width: 32,
        input_channels: 3,
        class_count: 10,
    }
}

pub fn template_by_name(name: &str) -> Result<NetworkTemplate> {
    match name {
        "vgg16" => Ok(default_vgg16_template()),
        "vgg10" => Ok(default_vgg10_template()),
        other => Err(Error::UnknownTemplate(other.into())),
    }
}

/// Template for a layer count accepted by the CLI (16 or 10).
pub fn template_for_layers(layers: usize) -> Result<NetworkTemplate> {
    match layers {
        16 => Ok(default_vgg16_template()),
        10 => Ok(default_vgg10_template()),
        n => Err(Error::domain(format!("no template with {n} layers"))),
    }
}

/// Reference (original VGG) widths for a known template.
pub fn reference_widths(template: &NetworkTemplate) -> Result<Vec<u64>> {
    let widths: &[u64] = match template.name.as_str() {
        "vgg16" => &VGG16_WIDTHS,
        "vgg10" => &VGG10_WIDTHS,
        other => return Err(Error::UnknownTemplate(other.into())),
    };
    if widths.len() != template.slot_count() {
        return Err(Error::LengthMismatch {
            template: template.name.clone(),
            expected: template.slot_count(),
            got: widths.len(),
        });
    }
    Ok(widths.to_vec())
}

/// Total feature budget: the sum of the template's original widths.
pub fn vgg_budget(template: &NetworkTemplate) -> Result<u64> {
    Ok(reference_widths(template)?.iter().sum())
}

/// Integer features per slot after scaling bin masses by the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAllocation {
    pub counts: Vec<u64>,
    pub budget: u64,
    pub captured_mass: f64,
    /// Slots whose scaled mass rounded to zero and were raised to one feature.
    pub collapsed_layers: usize,
}

impl FeatureAllocation {
    /// Allocation with given widths and nothing lost, e.g. the original
    /// VGG widths.
    pub fn from_counts(counts: Vec<u64>, budget: u64) -> Result<Self> {
        if counts.contains(&0) {
            return Err(Error::domain("feature counts must be at least 1"));
        }
        Ok(FeatureAllocation {
            counts,
            budget,
            captured_mass: 1.0,
            collapsed_layers: 0,
        })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Scale bin masses by `budget`, rounding half away from zero and flooring
/// each slot at one feature. Lost tail mass is not redistributed.
pub fn allocate(masses: &BinMasses, budget: u64) -> Result<FeatureAllocation> {
    if budget < masses.masses.len() as u64 {
        return Err(Error::domain(format!(
            "budget {budget} is smaller than the layer count {}",
            masses.masses.len()
        )));
    }
    let mut collapsed_layers = 0;
    let counts = masses
        .masses
        .iter()
        .map(|&m| {
            let rounded = (budget as f64 * m).round() as u64;
            if rounded == 0 {
                collapsed_layers += 1;
            }
            rounded.max(1)
        })
        .collect();
    Ok(FeatureAllocation {
        counts,
        budget,
        captured_mass: masses.captured(),
        collapsed_layers,
    })
}

/// Mass criterion only: at most `tolerance` of the budget is lost outside
/// the layer range. The boundary is inclusive.
pub fn keeps_mass(allocation: &FeatureAllocation, tolerance: f64) -> bool {
    allocation.captured_mass >= 1.0 - tolerance
}

/// Full validity: the mass criterion holds and no slot collapsed to zero
/// width before the one-feature floor.
pub fn is_valid(allocation: &FeatureAllocation, tolerance: f64) -> bool {
    keeps_mass(allocation, tolerance) && allocation.collapsed_layers == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Shape {
    Spatial {
        height: u64,
        width: u64,
        channels: u64,
    },
    Units {
        units: u64,
    },
}

impl Shape {
    pub fn flat_len(&self) -> u64 {
        match *self {
            Shape::Spatial {
                height,
                width,
                channels,
            } => height * width * channels,
            Shape::Units { units } => units,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Spatial {
                height,
                width,
                channels,
            } => write!(f, "{height}x{width}x{channels}"),
            Shape::Units { units } => write!(f, "{units}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealizedKind {
    Conv3x3,
    FullyConnected,
    Classifier,
}

/// One realized layer: what goes in, what comes out (after pooling, if any),
/// and its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub kind: RealizedKind,
    pub pooled: bool,
    pub input: Shape,
    pub output: Shape,
    pub parameters: u64,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub arch_id: String,
    pub params: SkewNormalParams,
    pub template_name: String,
    pub allocation: FeatureAllocation,
    pub layers: Vec<LayerRecord>,
    pub parameter_count: u64,
    pub flop_count: u64,
}

impl ArchitectureSpec {
    pub fn shape_class(&self) -> ShapeClass {
        classify_shape(&self.allocation)
    }
}

/// Propagate shapes through the template with the allocated widths and
/// account parameters and FLOPs.
///
/// Convolutions keep the spatial size (unit padding), pooling halves it and
/// the first fully-connected slot flattens. Parameters per conv slot are
/// `9·c_in·c_out + c_out` plus two batch-norm parameters per output feature;
/// fully-connected layers (including the appended classifier) have
/// `n_in·n_out + n_out`. A multiply–accumulate counts as two FLOPs; pooling
/// and activations are free.
pub fn realize(
    template: &NetworkTemplate,
    params: &SkewNormalParams,
    allocation: &FeatureAllocation,
) -> Result<ArchitectureSpec> {
    template.validate()?;
    if allocation.counts.len() != template.slot_count() {
        return Err(Error::LengthMismatch {
            template: template.name.clone(),
            expected: template.slot_count(),
            got: allocation.counts.len(),
        });
    }
    if allocation.counts.contains(&0) {
        return Err(Error::domain("feature counts must be at least 1"));
    }

    let mut layers = Vec::with_capacity(template.slot_count() + 1);
    let mut current = Shape::Spatial {
        height: template.input_height,
        width: template.input_width,
        channels: template.input_channels,
    };
    for (index, (slot, &features)) in template.slots.iter().zip(&allocation.counts).enumerate() {
        let record = match (slot.kind, current) {
            (
                LayerKind::Conv3x3,
                Shape::Spatial {
                    height,
                    width,
                    channels,
                },
            ) => {
                let parameters = CONV_KERNEL_AREA * channels * features
                    + features
                    + BATCH_NORM_PARAMS * features;
                let flops = 2 * CONV_KERNEL_AREA * channels * features * height * width;
                let (out_h, out_w) = if slot.pool_after {
                    (height / 2, width / 2)
                } else {
                    (height, width)
                };
                LayerRecord {
                    kind: RealizedKind::Conv3x3,
                    pooled: slot.pool_after,
                    input: current,
                    output: Shape::Spatial {
                        height: out_h,
                        width: out_w,
                        channels: features,
                    },
                    parameters,
                    flops,
                }
            }
            (LayerKind::FullyConnected, input) => {
                dense(RealizedKind::FullyConnected, input, features)
            }
            (LayerKind::Conv3x3, Shape::Units { .. }) => {
                return Err(Error::domain(format!(
                    "convolution at slot {} follows a flattened layer",
                    index + 1
                )));
            }
        };
        current = record.output;
        layers.push(record);
    }
    layers.push(dense(
        RealizedKind::Classifier,
        current,
        template.class_count,
    ));

    let parameter_count = layers.iter().map(|l| l.parameters).sum();
    let flop_count = layers.iter().map(|l| l.flops).sum();
    Ok(ArchitectureSpec {
        arch_id: arch_id(&template.name, params, allocation),
        params: *params,
        template_name: template.name.clone(),
        allocation: allocation.clone(),
        layers,
        parameter_count,
        flop_count,
    })
}

fn dense(kind: RealizedKind, input: Shape, units: u64) -> LayerRecord {
    let n_in = input.flat_len();
    LayerRecord {
        kind,
        pooled: false,
        input,
        output: Shape::Units { units },
        parameters: n_in * units + units,
        flops: 2 * n_in * units,
    }
}

/// Content hash of template, parameters (exact bit patterns) and counts;
/// 16 hex digits of SHA-256.
pub fn arch_id(
    template_name: &str,
    params: &SkewNormalParams,
    allocation: &FeatureAllocation,
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(template_name.as_bytes());
    hasher.update([0u8]);
    for value in [params.xi, params.omega, params.alpha] {
        hasher.update(value.to_bits().to_le_bytes());
    }
    hasher.update(allocation.budget.to_le_bytes());
    for &count in &allocation.counts {
        hasher.update(count.to_le_bytes());
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..8])
}

/// Qualitative profile of per-slot feature counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Increasing,
    Decreasing,
    Peaked,
    Flat,
}

impl ShapeClass {
    pub const ALL: [ShapeClass; 4] = [
        ShapeClass::Increasing,
        ShapeClass::Decreasing,
        ShapeClass::Peaked,
        ShapeClass::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Increasing => "increasing",
            ShapeClass::Decreasing => "decreasing",
            ShapeClass::Peaked => "peaked",
            ShapeClass::Flat => "flat",
        }
    }
}

impl fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_shape(allocation: &FeatureAllocation) -> ShapeClass {
    classify_counts(&allocation.counts)
}

pub fn classify_counts(counts: &[u64]) -> ShapeClass {
    let rising = counts.windows(2).any(|w| w[1] > w[0]);
    let falling = counts.windows(2).any(|w| w[1] < w[0]);
    match (rising, falling) {
        (false, false) => ShapeClass::Flat,
        (true, false) => ShapeClass::Increasing,
        (false, true) => ShapeClass::Decreasing,
        (true, true) => ShapeClass::Peaked,
    }
}
