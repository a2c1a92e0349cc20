//! Grayscale images, integral images (summed-area tables), and
//! constant-time rectangle sums.

/// A grayscale image with 8-bit pixels, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Image {
    /// Builds an image from row-major pixel data.
    ///
    /// Panics if `pixels.len() != width * height` or either side is zero.
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Image {
        assert!(width >= 1 && height >= 1, "image sides must be >= 1");
        assert_eq!(
            pixels.len(),
            width as usize * height as usize,
            "pixel buffer does not match {width}x{height}"
        );
        Image {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> u8 {
        assert!(x < self.width && y < self.height, "pixel out of bounds");
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// An axis-aligned rectangle in pixel coordinates; `(x, y)` is the top-left
/// pixel, `w`/`h` the extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Rect {
        assert!(w >= 1 && h >= 1, "rect sides must be >= 1");
        Rect { x, y, w, h }
    }
}

/// Summed-area table of an [`Image`]: `sum_at(x, y)` is the sum of all
/// source pixels at `(x', y')` with `x' <= x` and `y' <= y` (inclusive).
///
/// Layout is exactly `width * height` — there is no padding row or column;
/// the virtual `-1` row/column used by corner lookups is handled by a guard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralImage {
    width: u32,
    height: u32,
    sums: Vec<u32>,
}

impl IntegralImage {
    /// Computes the integral image in a single pass: each cell is derived
    /// from its west, north, and north-west neighbors.
    pub fn from_image(image: &Image) -> IntegralImage {
        let (w, h) = (image.width() as usize, image.height() as usize);
        // The whole image must fit the u32 accumulator even if every pixel
        // is saturated (a 24x24 window tops out at 146,880).
        assert!(
            255u64 * w as u64 * h as u64 <= u64::from(u32::MAX),
            "image too large for 32-bit cumulative sums"
        );
        let pixels = image.pixels();
        let mut sums = vec![0u32; w * h];
        for y in 0..h {
            for x in 0..w {
                let west = if x > 0 { sums[y * w + x - 1] } else { 0 };
                let north = if y > 0 { sums[(y - 1) * w + x] } else { 0 };
                let north_west = if x > 0 && y > 0 {
                    sums[(y - 1) * w + x - 1]
                } else {
                    0
                };
                sums[y * w + x] =
                    u32::from(pixels[y * w + x]) + west + north - north_west;
            }
        }
        IntegralImage {
            width: image.width(),
            height: image.height(),
            sums,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Cumulative sum at `(x, y)`, inclusive of that pixel.
    pub fn sum_at(&self, x: u32, y: u32) -> u32 {
        assert!(x < self.width && y < self.height, "lookup out of bounds");
        self.sums[y as usize * self.width as usize + x as usize]
    }

    /// Raw cumulative sums, row-major (used for content hashing).
    pub fn sums(&self) -> &[u32] {
        &self.sums
    }

    /// Sum of the pixels inside `r` from four corner lookups:
    /// `D + A - B - C`, where `D` is the bottom-right corner inside the
    /// rectangle, `A` the corner diagonally outside the top-left, and
    /// `B`/`C` the outside corners above and to the left. Corners that fall
    /// on the virtual `-1` row/column contribute zero.
    ///
    /// An out-of-bounds rectangle is a caller error and panics; it is never
    /// clamped.
    pub fn rect_sum(&self, r: Rect) -> i64 {
        assert!(
            r.x + r.w <= self.width && r.y + r.h <= self.height,
            "rect out of bounds"
        );
        let corner = |x: u32, y: u32, alive: bool| -> i64 {
            if alive {
                i64::from(self.sums[y as usize * self.width as usize + x as usize])
            } else {
                0
            }
        };
        let d = corner(r.x + r.w - 1, r.y + r.h - 1, true);
        let a = corner(
            r.x.wrapping_sub(1),
            r.y.wrapping_sub(1),
            r.x > 0 && r.y > 0,
        );
        let b = corner(r.x + r.w - 1, r.y.wrapping_sub(1), r.y > 0);
        let c = corner(r.x.wrapping_sub(1), r.y + r.h - 1, r.x > 0);
        d + a - b - c
    }
}
