//! Multi-channel block matching over a bounded search window.
//!
//! Blocks are `S×S` neighborhoods with replicate padding at the borders. The
//! distance between two locations is the sum, over all reference channels, of
//! the Euclidean norm of the block difference. Only reference channels are ever
//! read, so match lists do not depend on the distorted channel.

use std::cmp::Ordering;

use crate::error::{NocsError, Result};
use crate::image_model::{Channel, Coord};

/// Tuning parameters of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NocsParams {
    /// Edge length `S` of the square matching block.
    pub block_size: usize,
    /// Number `K` of matched locations stacked into one bar, the target included.
    pub stack_size: usize,
    /// Half-width of the search window; the window spans `2r+1` pixels per axis.
    pub search_radius: usize,
    /// Share of pending bars reconstructed per iteration, in (0, 1].
    pub batch_fraction: f64,
}

impl Default for NocsParams {
    fn default() -> Self {
        Self {
            block_size: 9,
            stack_size: 44,
            search_radius: 16,
            batch_fraction: 0.10,
        }
    }
}

impl NocsParams {
    pub fn validate(&self) -> Result<()> {
        if self.block_size < 1 {
            return Err(NocsError::InvalidParams("block size must be at least 1".into()));
        }
        if self.stack_size < 2 {
            return Err(NocsError::InvalidParams("stack size must be at least 2".into()));
        }
        if self.search_radius < 1 {
            return Err(NocsError::InvalidParams("search radius must be at least 1".into()));
        }
        let side = 2 * self.search_radius + 1;
        if side * side < self.stack_size {
            return Err(NocsError::InvalidParams(format!(
                "a {side}x{side} window cannot hold {} candidates",
                self.stack_size
            )));
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return Err(NocsError::InvalidParams(format!(
                "batch fraction {} not in (0, 1]",
                self.batch_fraction
            )));
        }
        Ok(())
    }
}

/// The `K` best matches for one target, sorted by distance with the target first.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchList {
    pub target: Coord,
    pub locations: Vec<Coord>,
    pub distances: Vec<f64>,
}

impl MatchList {
    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Offsets of the block around its center: rows `[c - lo, c + hi]`.
#[inline]
fn block_extent(block_size: usize) -> (usize, usize) {
    let lo = (block_size - 1) / 2;
    (lo, block_size - 1 - lo)
}

/// Extracts the `S×S` block centered at `center` (row-major), clamping to the edge.
pub fn extract_block(channel: &Channel, center: Coord, block_size: usize) -> Result<Vec<f64>> {
    channel.check_coord(center)?;
    if block_size == 0 {
        return Err(NocsError::InvalidParams("block size must be at least 1".into()));
    }
    let (lo, _) = block_extent(block_size);
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut block = Vec::with_capacity(block_size * block_size);
    for i in 0..block_size {
        let r = clamp(center.row as isize - lo as isize + i as isize, channel.height());
        for j in 0..block_size {
            let c = clamp(center.col as isize - lo as isize + j as isize, channel.width());
            block.push(channel.get(r, c));
        }
    }
    Ok(block)
}

/// Sum over reference channels of `‖B_i(x) − B_i(y)‖₂`.
pub fn block_distance(refs: &[Channel], x: Coord, y: Coord, block_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for channel in refs {
        let a = extract_block(channel, x, block_size)?;
        let b = extract_block(channel, y, block_size)?;
        let ss: f64 = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum();
        total += ss.sqrt();
    }
    Ok(total)
}

/// Finds the `K` nearest blocks to `x`. Builds a [`BlockMatcher`] per call; reuse
/// one matcher when matching many targets.
pub fn match_blocks(refs: &[Channel], x: Coord, params: &NocsParams) -> Result<MatchList> {
    BlockMatcher::new(refs, params)?.match_at(x)
}

/// Reference channels pre-padded by the block half-widths so that block rows are
/// contiguous slices.
#[derive(Debug, Clone)]
pub struct BlockMatcher {
    params: NocsParams,
    width: usize,
    height: usize,
    padded_width: usize,
    planes: Vec<Vec<f64>>,
}

impl BlockMatcher {
    pub fn new(refs: &[Channel], params: &NocsParams) -> Result<Self> {
        params.validate()?;
        let first = refs.first().ok_or(NocsError::NoReferences)?;
        let (width, height) = (first.width(), first.height());
        for r in refs {
            r.same_shape(width, height)?;
        }
        let s = params.block_size;
        let (lo, _) = block_extent(s);
        let padded_width = width + s - 1;
        let padded_height = height + s - 1;
        let planes = refs
            .iter()
            .map(|ch| {
                let mut plane = Vec::with_capacity(padded_width * padded_height);
                for pr in 0..padded_height {
                    let r = (pr as isize - lo as isize).clamp(0, height as isize - 1) as usize;
                    for pc in 0..padded_width {
                        let c = (pc as isize - lo as isize).clamp(0, width as isize - 1) as usize;
                        plane.push(ch.get(r, c));
                    }
                }
                plane
            })
            .collect();
        Ok(Self {
            params: *params,
            width,
            height,
            padded_width,
            planes,
        })
    }

    pub fn params(&self) -> &NocsParams {
        &self.params
    }

    #[inline]
    fn distance_unchecked(&self, x: Coord, y: Coord) -> f64 {
        let s = self.params.block_size;
        let pw = self.padded_width;
        let mut total = 0.0;
        for plane in &self.planes {
            let mut ss = 0.0;
            for i in 0..s {
                let a = &plane[(x.row + i) * pw + x.col..][..s];
                let b = &plane[(y.row + i) * pw + y.col..][..s];
                ss += a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
            }
            total += ss.sqrt();
        }
        total
    }

    pub fn distance(&self, x: Coord, y: Coord) -> Result<f64> {
        for p in [x, y] {
            if p.row >= self.height || p.col >= self.width {
                return Err(NocsError::OutOfBounds {
                    row: p.row,
                    col: p.col,
                    width: self.width,
                    height: self.height,
                });
            }
        }
        Ok(self.distance_unchecked(x, y))
    }

    /// Rows and columns of the search window around `x`, clipped to the image.
    fn window(&self, x: Coord) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let r = self.params.search_radius;
        (
            x.row.saturating_sub(r)..=(x.row + r).min(self.height - 1),
            x.col.saturating_sub(r)..=(x.col + r).min(self.width - 1),
        )
    }

    /// The `K` best window locations for `x`; ties resolve in row-major order.
    pub fn match_at(&self, x: Coord) -> Result<MatchList> {
        if x.row >= self.height || x.col >= self.width {
            return Err(NocsError::OutOfBounds {
                row: x.row,
                col: x.col,
                width: self.width,
                height: self.height,
            });
        }
        let k = self.params.stack_size;
        let (rows, cols) = self.window(x);
        let available = rows.clone().count() * cols.clone().count();
        if available < k {
            return Err(NocsError::WindowTooSmall {
                available,
                required: k,
            });
        }

        let mut candidates = Vec::with_capacity(available - 1);
        for row in rows {
            for col in cols.clone() {
                let y = Coord::new(row, col);
                if y != x {
                    candidates.push((self.distance_unchecked(x, y), y));
                }
            }
        }
        let order = |a: &(f64, Coord), b: &(f64, Coord)| -> Ordering {
            a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
        };
        let keep = k - 1;
        if keep < candidates.len() {
            candidates.select_nth_unstable_by(keep, order);
            candidates.truncate(keep);
        }
        candidates.sort_unstable_by(order);

        let mut locations = Vec::with_capacity(k);
        let mut distances = Vec::with_capacity(k);
        locations.push(x);
        distances.push(0.0);
        for (d, y) in candidates {
            locations.push(y);
            distances.push(d);
        }
        Ok(MatchList {
            target: x,
            locations,
            distances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noise(w: usize, h: usize, seed: u64) -> Channel {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        Channel::from_fn(w, h, |_, _| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 256) as f64
        })
    }

    #[test]
    fn constant_block() {
        let c = Channel::filled(12, 10, 7.0);
        let b = extract_block(&c, Coord::new(4, 5), 9).unwrap();
        assert_eq!(b, vec![7.0; 81]);
    }

    #[test]
    fn corner_block_matches_clamped_indexing() {
        let ramp = Channel::from_fn(6, 5, |r, c| (10 * r + c) as f64);
        let b = extract_block(&ramp, Coord::new(0, 0), 5).unwrap();
        let mut expected = Vec::new();
        for dr in -2i32..=2 {
            for dc in -2i32..=2 {
                let r = dr.max(0) as f64;
                let c = dc.max(0) as f64;
                expected.push(10.0 * r + c);
            }
        }
        assert_eq!(b, expected);
    }

    #[test]
    fn even_block_extends_forward() {
        let ramp = Channel::from_fn(8, 8, |r, c| (10 * r + c) as f64);
        let b = extract_block(&ramp, Coord::new(4, 4), 4).unwrap();
        // rows 3..=5 + 1 => [3, 6]
        assert_eq!(b[0], 33.0);
        assert_eq!(b[15], 66.0);
    }

    #[test]
    fn single_pixel_block() {
        let ramp = Channel::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(extract_block(&ramp, Coord::new(2, 3), 1).unwrap(), vec![11.0]);
    }

    #[test]
    fn extract_out_of_bounds() {
        let c = Channel::filled(4, 4, 1.0);
        assert!(matches!(
            extract_block(&c, Coord::new(4, 0), 3),
            Err(NocsError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn distance_of_unit_blocks() {
        let c = Channel::from_fn(10, 10, |_, col| if col < 5 { 0.0 } else { 1.0 });
        let d = block_distance(&[c], Coord::new(4, 1), Coord::new(4, 8), 3).unwrap();
        assert_eq!(d, 3.0);
    }

    #[test]
    fn matcher_agrees_with_direct_distance() {
        let refs = [noise(16, 16, 1), noise(16, 16, 2)];
        let params = NocsParams {
            block_size: 5,
            ..NocsParams::default()
        };
        let m = BlockMatcher::new(&refs, &params).unwrap();
        for (x, y) in [((0, 0), (15, 15)), ((3, 14), (9, 1)), ((7, 7), (7, 8))] {
            let (x, y) = (Coord::new(x.0, x.1), Coord::new(y.0, y.1));
            let a = m.distance(x, y).unwrap();
            let b = block_distance(&refs, x, y, 5).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_refs_give_row_major_prefix() {
        let refs = [Channel::filled(20, 20, 3.0)];
        let params = NocsParams {
            block_size: 3,
            stack_size: 5,
            search_radius: 2,
            ..NocsParams::default()
        };
        let x = Coord::new(10, 10);
        let m = match_blocks(&refs, x, &params).unwrap();
        assert_eq!(
            m.locations,
            vec![x, Coord::new(8, 8), Coord::new(8, 9), Coord::new(8, 10), Coord::new(8, 11)]
        );
        assert!(m.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn full_window_selection() {
        let refs = [noise(9, 9, 5)];
        let params = NocsParams {
            block_size: 3,
            stack_size: 9,
            search_radius: 1,
            ..NocsParams::default()
        };
        let x = Coord::new(4, 4);
        let m = match_blocks(&refs, x, &params).unwrap();
        let mut locs = m.locations.clone();
        locs.sort();
        let mut expected: Vec<_> = (3..=5).flat_map(|r| (3..=5).map(move |c| Coord::new(r, c))).collect();
        expected.sort();
        assert_eq!(locs, expected);
        assert_eq!(m.locations[0], x);
    }

    #[test]
    fn clipped_window_too_small() {
        let refs = [noise(9, 9, 5)];
        let params = NocsParams {
            block_size: 3,
            stack_size: 9,
            search_radius: 2,
            ..NocsParams::default()
        };
        // corner window is 3x3 = 9: fine
        assert!(match_blocks(&refs, Coord::new(0, 0), &params).is_ok());
        let params = NocsParams { stack_size: 10, ..params };
        assert_eq!(
            match_blocks(&refs, Coord::new(0, 0), &params).unwrap_err(),
            NocsError::WindowTooSmall {
                available: 9,
                required: 10
            }
        );
    }

    #[test]
    fn invalid_params() {
        let bad = [
            NocsParams { block_size: 0, ..Default::default() },
            NocsParams { stack_size: 1, ..Default::default() },
            NocsParams { search_radius: 0, ..Default::default() },
            NocsParams { search_radius: 1, stack_size: 10, ..Default::default() },
            NocsParams { batch_fraction: 0.0, ..Default::default() },
            NocsParams { batch_fraction: 1.5, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(p.validate(), Err(NocsError::InvalidParams(_))), "{p:?}");
        }
        assert!(NocsParams::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_zero_on_self(
            seed in any::<u64>(), s in 1usize..6,
            xr in 0usize..12, xc in 0usize..12, yr in 0usize..12, yc in 0usize..12,
        ) {
            let refs = [noise(12, 12, seed), noise(12, 12, seed ^ 0xABCD)];
            let (x, y) = (Coord::new(xr, xc), Coord::new(yr, yc));
            let a = block_distance(&refs, x, y, s).unwrap();
            let b = block_distance(&refs, y, x, s).unwrap();
            prop_assert_eq!(a, b);
            prop_assert_eq!(block_distance(&refs, x, x, s).unwrap(), 0.0);
            prop_assert!(a >= 0.0);
        }

        #[test]
        fn match_lists_are_sorted_and_in_window(seed in any::<u64>(), xr in 0usize..14, xc in 0usize..14) {
            let refs = [noise(14, 14, seed)];
            let params = NocsParams { block_size: 3, stack_size: 8, search_radius: 3, ..Default::default() };
            let x = Coord::new(xr, xc);
            let m = match_blocks(&refs, x, &params).unwrap();
            prop_assert_eq!(m.locations[0], x);
            prop_assert_eq!(m.distances[0], 0.0);
            prop_assert!(m.distances.windows(2).all(|w| w[0] <= w[1]));
            for y in &m.locations {
                prop_assert!(y.row.abs_diff(x.row) <= 3 && y.col.abs_diff(x.col) <= 3);
            }
            let again = match_blocks(&refs, x, &params).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
