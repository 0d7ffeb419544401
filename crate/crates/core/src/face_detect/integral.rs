use crate::frame_io::GrayFrame;
use crate::geometry::Rect;

use super::DetectError;

/// Summed-area tables for pixel values and squared pixel values.
///
/// Entry `(x, y)` holds the sum over all pixels strictly above and to the left,
/// so both tables are `(width + 1) x (height + 1)` with a zero first row and
/// column.
#[derive(Clone, Debug)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sum: Vec<u64>,
    sq_sum: Vec<u64>,
}

impl IntegralImage {
    pub fn new(frame: &GrayFrame) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let stride = w + 1;
        let mut sum = vec![0u64; stride * (h + 1)];
        let mut sq_sum = vec![0u64; stride * (h + 1)];
        for y in 0..h {
            let (mut row_sum, mut row_sq) = (0u64, 0u64);
            for (x, &p) in frame.row(y).iter().enumerate() {
                let p = u64::from(p);
                row_sum += p;
                row_sq += p * p;
                let i = (y + 1) * stride + x + 1;
                sum[i] = sum[i - stride] + row_sum;
                sq_sum[i] = sq_sum[i - stride] + row_sq;
            }
        }
        Self { width: w, height: h, sum, sq_sum }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw table entry at `(x, y)`, `0 <= x <= width`, `0 <= y <= height`.
    pub fn at(&self, x: usize, y: usize) -> u64 {
        self.sum[y * (self.width + 1) + x]
    }

    fn check(&self, r: &Rect) -> Result<(), DetectError> {
        if r.fits_in(self.width, self.height) {
            Ok(())
        } else {
            Err(DetectError::OutOfBounds { rect: *r, width: self.width, height: self.height })
        }
    }

    pub fn rect_sum(&self, r: &Rect) -> Result<u64, DetectError> {
        self.check(r)?;
        Ok(self.rect_sum_unchecked(r.x as usize, r.y as usize, r.w as usize, r.h as usize))
    }

    pub fn rect_sq_sum(&self, r: &Rect) -> Result<u64, DetectError> {
        self.check(r)?;
        Ok(Self::lookup(&self.sq_sum, self.width + 1, r.x as usize, r.y as usize, r.w as usize, r.h as usize))
    }

    #[inline]
    pub(crate) fn rect_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        Self::lookup(&self.sum, self.width + 1, x, y, w, h)
    }

    #[inline]
    pub(crate) fn rect_sq_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> u64 {
        Self::lookup(&self.sq_sum, self.width + 1, x, y, w, h)
    }

    #[inline]
    fn lookup(table: &[u64], stride: usize, x: usize, y: usize, w: usize, h: usize) -> u64 {
        let a = table[y * stride + x];
        let b = table[y * stride + x + w];
        let c = table[(y + h) * stride + x];
        let d = table[(y + h) * stride + x + w];
        (d + a) - (b + c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_pixel() {
        let f = GrayFrame::new(1, 1, vec![7], 0).unwrap();
        let ii = IntegralImage::new(&f);
        assert_eq!(ii.rect_sum(&Rect::new(0, 0, 1, 1)).unwrap(), 7);
        assert_eq!(ii.at(0, 0), 0);
        assert_eq!(ii.at(1, 1), 7);
    }

    #[test]
    fn uniform_ones() {
        let ii = IntegralImage::new(&GrayFrame::filled(320, 240, 1, 0));
        assert_eq!(ii.rect_sum(&Rect::new(0, 0, 320, 240)).unwrap(), 320 * 240);
        assert_eq!(ii.rect_sum(&Rect::new(17, 3, 40, 9)).unwrap(), 360);
        assert_eq!(ii.rect_sum(&Rect::new(5, 5, 0, 9)).unwrap(), 0);
    }

    #[test]
    fn first_row_and_column_are_zero() {
        let ii = IntegralImage::new(&GrayFrame::filled(8, 6, 200, 0));
        assert!((0..=8).all(|x| ii.at(x, 0) == 0));
        assert!((0..=6).all(|y| ii.at(0, y) == 0));
    }

    #[test]
    fn out_of_bounds_rect() {
        let ii = IntegralImage::new(&GrayFrame::filled(10, 10, 1, 0));
        assert!(matches!(ii.rect_sum(&Rect::new(5, 5, 6, 1)), Err(DetectError::OutOfBounds { .. })));
    }

    #[test]
    fn squared_sums_match_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = GrayFrame::from_fn(64, 48, 0, |_, _| rng.gen());
        let ii = IntegralImage::new(&f);
        let r = Rect::new(3, 7, 20, 11);
        let naive: u64 = (7..18).flat_map(|y| (3..23).map(move |x| (x, y))).map(|(x, y)| (f.get(x, y) as u64).pow(2)).sum();
        assert_eq!(ii.rect_sq_sum(&r).unwrap(), naive);
    }
}
