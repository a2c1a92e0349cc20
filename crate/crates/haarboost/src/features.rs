//! Haar rectangle features: enumeration over a square window in a canonical
//! global order, and evaluation against an integral image.

use serde::{Deserialize, Serialize};

use crate::imaging::{IntegralImage, Rect};

/// The five feature shapes. Declaration order is the canonical enumeration
/// order; changing it would renumber every feature and break stored models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureType {
    ThreeRectHorizontal,
    ThreeRectVertical,
    TwoRectHorizontal,
    TwoRectVertical,
    FourRect,
}

impl FeatureType {
    pub const ALL: [FeatureType; 5] = [
        FeatureType::ThreeRectHorizontal,
        FeatureType::ThreeRectVertical,
        FeatureType::TwoRectHorizontal,
        FeatureType::TwoRectVertical,
        FeatureType::FourRect,
    ];

    /// Cell grid of the type: (cells across, cells down). Feature bounds are
    /// always whole multiples of the grid, so every cell has integer size.
    pub fn cell_grid(self) -> (u32, u32) {
        match self {
            FeatureType::ThreeRectHorizontal => (3, 1),
            FeatureType::ThreeRectVertical => (1, 3),
            FeatureType::TwoRectHorizontal => (2, 1),
            FeatureType::TwoRectVertical => (1, 2),
            FeatureType::FourRect => (2, 2),
        }
    }

    /// Stable display name (matches the serialized form).
    pub fn name(self) -> &'static str {
        match self {
            FeatureType::ThreeRectHorizontal => "three-rect-horizontal",
            FeatureType::ThreeRectVertical => "three-rect-vertical",
            FeatureType::TwoRectHorizontal => "two-rect-horizontal",
            FeatureType::TwoRectVertical => "two-rect-vertical",
            FeatureType::FourRect => "four-rect",
        }
    }
}

/// One Haar feature: a typed rectangle placed in the window, plus its
/// position in the canonical enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarFeature {
    pub ftype: FeatureType,
    pub bounds: Rect,
    pub global_index: u32,
}

impl HaarFeature {
    /// Dark-cell sum minus white-cell sum.
    ///
    /// Shading convention (fixed; a global sign flip would be absorbed by
    /// stump polarity, but cross-node agreement needs one definite choice):
    /// two-rect types shade the second cell (right / bottom), three-rect
    /// types shade the middle cell, four-rect shades the main diagonal
    /// (top-left and bottom-right).
    pub fn evaluate(&self, ii: &IntegralImage) -> i64 {
        let Rect { x, y, w, h } = self.bounds;
        match self.ftype {
            FeatureType::TwoRectHorizontal => {
                let cw = w / 2;
                let white = ii.rect_sum(Rect::new(x, y, cw, h));
                let dark = ii.rect_sum(Rect::new(x + cw, y, cw, h));
                dark - white
            }
            FeatureType::TwoRectVertical => {
                let ch = h / 2;
                let white = ii.rect_sum(Rect::new(x, y, w, ch));
                let dark = ii.rect_sum(Rect::new(x, y + ch, w, ch));
                dark - white
            }
            FeatureType::ThreeRectHorizontal => {
                let cw = w / 3;
                let left = ii.rect_sum(Rect::new(x, y, cw, h));
                let mid = ii.rect_sum(Rect::new(x + cw, y, cw, h));
                let right = ii.rect_sum(Rect::new(x + 2 * cw, y, cw, h));
                mid - left - right
            }
            FeatureType::ThreeRectVertical => {
                let ch = h / 3;
                let top = ii.rect_sum(Rect::new(x, y, w, ch));
                let mid = ii.rect_sum(Rect::new(x, y + ch, w, ch));
                let bottom = ii.rect_sum(Rect::new(x, y + 2 * ch, w, ch));
                mid - top - bottom
            }
            FeatureType::FourRect => {
                let (cw, ch) = (w / 2, h / 2);
                let tl = ii.rect_sum(Rect::new(x, y, cw, ch));
                let tr = ii.rect_sum(Rect::new(x + cw, y, cw, ch));
                let bl = ii.rect_sum(Rect::new(x, y + ch, cw, ch));
                let br = ii.rect_sum(Rect::new(x + cw, y + ch, cw, ch));
                tl + br - tr - bl
            }
        }
    }
}

/// Per-type and total feature counts for one window size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureCensus {
    /// Counts in canonical type order (see [`FeatureType::ALL`]).
    pub per_type: [u32; 5],
    pub total: u32,
}

/// Closed-form census: for base cell grid (cw, ch), the count is
/// sum over w (multiples of cw) and h (multiples of ch) of
/// (W - w + 1) * (W - h + 1).
pub fn census(window: u32) -> FeatureCensus {
    assert!(window >= 3, "window must be at least 3");
    let mut per_type = [0u32; 5];
    for (slot, ftype) in FeatureType::ALL.iter().enumerate() {
        let (cw, ch) = ftype.cell_grid();
        let mut count = 0u32;
        let mut h = ch;
        while h <= window {
            let mut w = cw;
            while w <= window {
                count += (window - w + 1) * (window - h + 1);
                w += cw;
            }
            h += ch;
        }
        per_type[slot] = count;
    }
    FeatureCensus {
        per_type,
        total: per_type.iter().sum(),
    }
}

/// The full, canonically ordered feature list for one window size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTable {
    window: u32,
    features: Vec<HaarFeature>,
    census: FeatureCensus,
}

impl FeatureTable {
    /// Enumerates every feature of every type.
    ///
    /// Order is canonical and identical on every node: types in
    /// [`FeatureType::ALL`] order; within a type ascending height, then
    /// width, then row, then column. `global_index` equals list position.
    pub fn enumerate(window: u32) -> FeatureTable {
        assert!(window >= 3, "window must be at least 3");
        let census = census(window);
        let mut features = Vec::with_capacity(census.total as usize);
        for ftype in FeatureType::ALL {
            let (cw, ch) = ftype.cell_grid();
            let mut h = ch;
            while h <= window {
                let mut w = cw;
                while w <= window {
                    for y in 0..=window - h {
                        for x in 0..=window - w {
                            features.push(HaarFeature {
                                ftype,
                                bounds: Rect::new(x, y, w, h),
                                global_index: features.len() as u32,
                            });
                        }
                    }
                    w += cw;
                }
                h += ch;
            }
        }
        debug_assert_eq!(features.len() as u32, census.total);
        FeatureTable {
            window,
            features,
            census,
        }
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn features(&self) -> &[HaarFeature] {
        &self.features
    }

    pub fn census(&self) -> FeatureCensus {
        self.census
    }

    pub fn get(&self, global_index: u32) -> &HaarFeature {
        &self.features[global_index as usize]
    }

    /// Contiguous index range occupied by one feature type.
    pub fn type_range(&self, ftype: FeatureType) -> std::ops::Range<u32> {
        let slot = FeatureType::ALL
            .iter()
            .position(|t| *t == ftype)
            .expect("type is one of the five variants");
        let start: u32 = self.census.per_type[..slot].iter().sum();
        start..start + self.census.per_type[slot]
    }
}
