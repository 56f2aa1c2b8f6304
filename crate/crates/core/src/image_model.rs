//! Channels, masks and the validated reconstruction problem.

use crate::error::{NocsError, Result};

/// Pixel position, `row` first. The derived ordering is row-major scan order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(NocsError::EmptyChannel { width, height });
    }
    Ok(())
}

/// One scalar image plane, row-major, nominal range [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Channel {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        if values.len() != width * height {
            return Err(NocsError::SampleCount {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(NocsError::NonFinite { index });
        }
        Ok(Self { width, height, values })
    }

    /// Promotes 8-bit samples losslessly.
    pub fn from_u8(width: usize, height: usize, samples: &[u8]) -> Result<Self> {
        Self::new(width, height, samples.iter().map(|&v| f64::from(v)).collect())
    }

    /// Builds a channel from `f(row, col)`.
    ///
    /// Panics if either dimension is zero or `f` returns a non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self::new(width, height, values).expect("invalid channel")
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn at(&self, p: Coord) -> f64 {
        self.get(p.row, p.col)
    }

    /// Panics on a non-finite value.
    pub fn set(&mut self, p: Coord, value: f64) {
        assert!(value.is_finite(), "non-finite pixel value {value}");
        self.values[p.row * self.width + p.col] = value;
    }

    pub fn contains(&self, p: Coord) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub(crate) fn check_coord(&self, p: Coord) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(NocsError::OutOfBounds {
                row: p.row,
                col: p.col,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub(crate) fn same_shape(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(NocsError::DimensionMismatch {
                expected_width: width,
                expected_height: height,
                width: self.width,
                height: self.height,
            })
        }
    }
}

/// Binary validity map: `true` (1) marks available data, `false` (0) a pixel to reconstruct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if flags.len() != width * height {
            return Err(NocsError::SampleCount {
                expected: width * height,
                actual: flags.len(),
            });
        }
        Ok(Self { width, height, flags })
    }

    /// Accepts strictly binary 0/1 flags.
    pub fn from_flags(width: usize, height: usize, flags: &[u8]) -> Result<Self> {
        let mut out = Vec::with_capacity(flags.len());
        for (index, &value) in flags.iter().enumerate() {
            match value {
                0 => out.push(false),
                1 => out.push(true),
                _ => return Err(NocsError::NonBinaryFlag { index, value }),
            }
        }
        Self::new(width, height, out)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut flags = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                flags.push(f(r, c));
            }
        }
        Self::new(width, height, flags).expect("invalid mask")
    }

    pub fn all_valid(width: usize, height: usize) -> Self {
        Self::from_fn(width, height, |_, _| true)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    /// Flags as 0/1 bytes.
    pub fn to_flags(&self) -> Vec<u8> {
        self.flags.iter().map(|&f| u8::from(f)).collect()
    }

    #[inline]
    pub fn is_valid(&self, p: Coord) -> bool {
        self.flags[p.row * self.width + p.col]
    }

    pub fn set_valid(&mut self, p: Coord, valid: bool) {
        self.flags[p.row * self.width + p.col] = valid;
    }

    pub fn valid_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn masked_count(&self) -> usize {
        self.flags.len() - self.valid_count()
    }

    pub fn masked_fraction(&self) -> f64 {
        self.masked_count() as f64 / self.flags.len() as f64
    }

    /// Masked coordinates in row-major order.
    pub fn masked_coords(&self) -> Vec<Coord> {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, &f)| !f)
            .map(|(i, _)| Coord::new(i / self.width, i % self.width))
            .collect()
    }
}

/// Element-wise product `clean ⊙ mask`; masked pixels become exactly 0.
pub fn apply_mask(clean: &Channel, mask: &Mask) -> Result<Channel> {
    clean.same_shape(mask.width, mask.height)?;
    let values = clean
        .values
        .iter()
        .zip(&mask.flags)
        .map(|(&v, &f)| if f { v } else { 0.0 })
        .collect();
    Channel::new(clean.width, clean.height, values)
}

/// Distorted channel, its mask and the ordered reference channels, all of one size.
#[derive(Debug, Clone)]
pub struct ReconstructionProblem {
    distorted: Channel,
    mask: Mask,
    references: Vec<Channel>,
}

impl ReconstructionProblem {
    pub fn new(distorted: Channel, mask: Mask, references: Vec<Channel>) -> Result<Self> {
        let (w, h) = (distorted.width, distorted.height);
        if mask.width != w || mask.height != h {
            return Err(NocsError::DimensionMismatch {
                expected_width: w,
                expected_height: h,
                width: mask.width,
                height: mask.height,
            });
        }
        if references.is_empty() {
            return Err(NocsError::NoReferences);
        }
        for r in &references {
            r.same_shape(w, h)?;
        }
        if mask.valid_count() == 0 {
            return Err(NocsError::FullyMasked);
        }
        Ok(Self {
            distorted,
            mask,
            references,
        })
    }

    pub fn distorted(&self) -> &Channel {
        &self.distorted
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn references(&self) -> &[Channel] {
        &self.references
    }

    pub fn width(&self) -> usize {
        self.distorted.width
    }

    pub fn height(&self) -> usize {
        self.distorted.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ch(w: usize, h: usize, v: &[f64]) -> Channel {
        Channel::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn apply_mask_elementwise() {
        let clean = ch(2, 2, &[10.0, 20.0, 30.0, 40.0]);
        let mask = Mask::from_flags(2, 2, &[1, 0, 0, 1]).unwrap();
        let out = apply_mask(&clean, &mask).unwrap();
        assert_eq!(out.values(), &[10.0, 0.0, 0.0, 40.0]);
    }

    #[test]
    fn apply_mask_trivial_cases() {
        let zeros = Channel::filled(3, 2, 0.0);
        let mask = Mask::from_flags(3, 2, &[0, 1, 0, 1, 1, 0]).unwrap();
        assert_eq!(apply_mask(&zeros, &mask).unwrap(), zeros);

        let clean = Channel::from_fn(3, 2, |r, c| (r * 3 + c) as f64 * 1.5);
        assert_eq!(apply_mask(&clean, &Mask::all_valid(3, 2)).unwrap(), clean);
    }

    #[test]
    fn apply_mask_dimension_mismatch() {
        let clean = Channel::filled(3, 2, 1.0);
        let err = apply_mask(&clean, &Mask::all_valid(2, 3)).unwrap_err();
        assert!(matches!(err, NocsError::DimensionMismatch { .. }));
    }

    #[test]
    fn channel_rejects_bad_input() {
        assert!(matches!(Channel::new(0, 3, vec![]), Err(NocsError::EmptyChannel { .. })));
        assert!(matches!(
            Channel::new(2, 2, vec![1.0; 3]),
            Err(NocsError::SampleCount { expected: 4, actual: 3 })
        ));
        assert!(matches!(
            Channel::new(2, 1, vec![1.0, f64::NAN]),
            Err(NocsError::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Mask::from_flags(2, 1, &[1, 2]),
            Err(NocsError::NonBinaryFlag { index: 1, value: 2 })
        ));
    }

    #[test]
    fn new_problem_validation() {
        let c = Channel::filled(4, 4, 5.0);
        let mask = Mask::from_fn(4, 4, |r, _| r > 0);
        let p = ReconstructionProblem::new(c.clone(), mask.clone(), vec![c.clone(), c.clone()]).unwrap();
        assert_eq!(p.references().len(), 2);

        let none = Mask::from_fn(4, 4, |_, _| false);
        assert_eq!(
            ReconstructionProblem::new(c.clone(), none, vec![c.clone()]).unwrap_err(),
            NocsError::FullyMasked
        );

        let short = Channel::filled(4, 3, 5.0);
        assert!(matches!(
            ReconstructionProblem::new(c.clone(), mask.clone(), vec![short]).unwrap_err(),
            NocsError::DimensionMismatch { .. }
        ));
        assert_eq!(
            ReconstructionProblem::new(c, mask, vec![]).unwrap_err(),
            NocsError::NoReferences
        );
    }

    #[test]
    fn masked_coords_row_major() {
        let mask = Mask::from_flags(3, 2, &[1, 0, 1, 0, 1, 1]).unwrap();
        assert_eq!(mask.masked_coords(), vec![Coord::new(0, 1), Coord::new(1, 0)]);
        assert_eq!(mask.masked_count(), 2);
    }

    fn channel_and_mask() -> impl Strategy<Value = (Channel, Mask)> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            (
                proptest::collection::vec(0.0f64..255.0, w * h),
                proptest::collection::vec(any::<bool>(), w * h),
            )
                .prop_map(move |(v, f)| (Channel::new(w, h, v).unwrap(), Mask::new(w, h, f).unwrap()))
        })
    }

    proptest! {
        #[test]
        fn apply_mask_idempotent_and_preserves_valid((clean, mask) in channel_and_mask()) {
            let once = apply_mask(&clean, &mask).unwrap();
            let twice = apply_mask(&once, &mask).unwrap();
            prop_assert_eq!(&once, &twice);
            for (i, &f) in mask.flags().iter().enumerate() {
                if f {
                    prop_assert_eq!(once.values()[i], clean.values()[i]);
                } else {
                    prop_assert_eq!(once.values()[i], 0.0);
                }
            }
        }
    }
}
