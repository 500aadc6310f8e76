//! Dynamic-resolution image tokenization planning.
//!
//! Given a source image size and a strategy configuration, these planners
//! decide how the image is resized, tiled, and mapped onto visual token
//! positions, while never exceeding the configured token budget. Everything
//! here is pure geometry; no pixels are touched.

use serde::{Deserialize, Serialize};

use crate::geometry::{NormPoint, NormRect};
use crate::{Error, Result};

/// Resolution-handling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Resize to a patch grid chosen directly under a [min, max] patch budget.
    DynamicRes,
    /// Resize to an exact grid of fixed tiles, each processed at multiple
    /// scales with channel concatenation (token count stays per-tile).
    DynamicS2,
    /// Keep (or globally downscale) the image and cover it with overlapping
    /// fixed-size crops.
    MultiCrop,
    /// MultiCrop with large tiles, each processed at multiple scales.
    MultiCropS2,
}

impl Strategy {
    pub fn is_tiled(self) -> bool {
        !matches!(self, Strategy::DynamicRes)
    }
}

/// Full configuration for one planning strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Pixel side of the square block behind one visual token.
    pub patch_px: u32,
    /// Pixel side of one crop/tile for the tiled strategies.
    pub tile_px: u32,
    /// Visual tokens contributed by each tile.
    pub tokens_per_tile: u32,
    /// Hard budget a plan may never exceed.
    pub max_tokens: u32,
    /// Lower patch-count bound (DynamicRes only).
    pub min_patches: u32,
    /// Upper patch-count bound (DynamicRes only).
    pub max_patches: u32,
    /// Scale levels recorded for the S2 strategies.
    pub s2_scales: Vec<u32>,
    /// Grayscale fill byte for letterboxed crops.
    pub pad_value: u8,
}

pub const DEFAULT_PATCH_PX: u32 = 16;
pub const DEFAULT_TILE_PX: u32 = 384;
pub const LARGE_TILE_PX: u32 = 1536;
pub const DEFAULT_TOKENS_PER_TILE: u32 = 576;
pub const DEFAULT_PAD_VALUE: u8 = 128;

impl StrategyConfig {
    /// Grid-search planner bounded by `[min_patches, max_patches]`; the token
    /// budget equals `max_patches` since each patch is one token.
    pub fn dynamic_res(min_patches: u32, max_patches: u32) -> Self {
        Self {
            strategy: Strategy::DynamicRes,
            patch_px: DEFAULT_PATCH_PX,
            tile_px: DEFAULT_TILE_PX,
            tokens_per_tile: DEFAULT_TOKENS_PER_TILE,
            max_tokens: max_patches,
            min_patches,
            max_patches,
            s2_scales: vec![1],
            pad_value: DEFAULT_PAD_VALUE,
        }
    }

    pub fn dynamic_s2(max_tokens: u32) -> Self {
        Self {
            strategy: Strategy::DynamicS2,
            patch_px: DEFAULT_PATCH_PX,
            tile_px: DEFAULT_TILE_PX,
            tokens_per_tile: DEFAULT_TOKENS_PER_TILE,
            max_tokens,
            min_patches: 1,
            max_patches: max_tokens,
            s2_scales: vec![1, 2],
            pad_value: DEFAULT_PAD_VALUE,
        }
    }

    pub fn multi_crop(max_tokens: u32) -> Self {
        Self {
            strategy: Strategy::MultiCrop,
            patch_px: DEFAULT_PATCH_PX,
            tile_px: DEFAULT_TILE_PX,
            tokens_per_tile: DEFAULT_TOKENS_PER_TILE,
            max_tokens,
            min_patches: 1,
            max_patches: max_tokens,
            s2_scales: vec![1],
            pad_value: DEFAULT_PAD_VALUE,
        }
    }

    pub fn multi_crop_s2(max_tokens: u32) -> Self {
        Self {
            strategy: Strategy::MultiCropS2,
            patch_px: DEFAULT_PATCH_PX,
            tile_px: LARGE_TILE_PX,
            tokens_per_tile: DEFAULT_TOKENS_PER_TILE,
            max_tokens,
            min_patches: 1,
            max_patches: max_tokens,
            s2_scales: vec![1, 2],
            pad_value: DEFAULT_PAD_VALUE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_px == 0 || self.tile_px == 0 {
            return Err(Error::Config("patch_px and tile_px must be positive".into()));
        }
        if self.tile_px % self.patch_px != 0 {
            return Err(Error::Config(format!(
                "tile_px {} is not a multiple of patch_px {}",
                self.tile_px, self.patch_px
            )));
        }
        if self.tokens_per_tile == 0 || self.max_tokens == 0 {
            return Err(Error::Config(
                "tokens_per_tile and max_tokens must be positive".into(),
            ));
        }
        match self.strategy {
            Strategy::DynamicRes => {
                if self.min_patches == 0 {
                    return Err(Error::Config("min_patches must be positive".into()));
                }
                if self.min_patches > self.max_patches {
                    return Err(Error::Config(format!(
                        "min_patches {} exceeds max_patches {}",
                        self.min_patches, self.max_patches
                    )));
                }
                if self.max_patches > self.max_tokens {
                    return Err(Error::Config(format!(
                        "max_patches {} exceeds the token budget {}",
                        self.max_patches, self.max_tokens
                    )));
                }
            }
            _ => {
                if self.max_tokens < self.tokens_per_tile {
                    return Err(Error::Config(format!(
                        "budget {} cannot fit one tile of {} tokens",
                        self.max_tokens, self.tokens_per_tile
                    )));
                }
                if self.strategy != Strategy::MultiCrop && self.s2_scales.is_empty() {
                    return Err(Error::Config("s2_scales must be non-empty".into()));
                }
            }
        }
        Ok(())
    }
}

/// One crop in resized-image space. `size` is what the encoder sees
/// (always the full tile for tiled strategies); `pad` records how much of the
/// right/bottom edge is letterbox fill rather than image content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSpec {
    pub offset: (u32, u32),
    pub size: (u32, u32),
    pub pad: (u32, u32),
}

impl CropSpec {
    /// Pixel extent actually backed by image content.
    pub fn content_size(&self) -> (u32, u32) {
        (self.size.0 - self.pad.0, self.size.1 - self.pad.1)
    }
}

/// The geometric output of a planning strategy.
///
/// `grid` is the patch grid for `DynamicRes` and the tile/crop grid for the
/// tiled strategies. `crops` is empty for `DynamicRes`. Crops live in
/// resized-image coordinates; for multi-crop with no downscale the resized
/// image is just the source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub strategy: Strategy,
    pub source_size: (u32, u32),
    pub resized_size: (u32, u32),
    pub grid: (u32, u32),
    pub crops: Vec<CropSpec>,
    pub scales: Vec<u32>,
    pub token_count: u32,
    pub config: StrategyConfig,
}

/// Plan an image under whichever strategy the config selects.
pub fn plan_patches(width: u32, height: u32, cfg: &StrategyConfig) -> Result<PatchPlan> {
    match cfg.strategy {
        Strategy::DynamicRes => plan_dynamic_resolution(width, height, cfg),
        Strategy::DynamicS2 => plan_dynamic_s2(width, height, cfg),
        Strategy::MultiCrop | Strategy::MultiCropS2 => plan_multicrop(width, height, cfg),
    }
}

fn check_input(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Input(format!(
            "image size {width}x{height} has a zero dimension"
        )));
    }
    Ok(())
}

/// Aspect distortion of drawing grid `(a, b)` over an image with log aspect
/// `ln_r = ln(H/W)`: `|ln((a/b) * H/W)|`. Zero means the grid's shape matches
/// the image exactly. `ln_tab[k]` caches `ln(k)`.
fn distortion(ln_tab: &[f64], a: u32, b: u32, ln_r: f64) -> f64 {
    (ln_tab[a as usize] - ln_tab[b as usize] + ln_r).abs()
}

fn ln_table(up_to: u32) -> Vec<f64> {
    let mut t = vec![0.0; up_to as usize + 1];
    for (k, slot) in t.iter_mut().enumerate().skip(1) {
        *slot = (k as f64).ln();
    }
    t
}

/// Search every grid `(a, b)` with `lo <= a*b <= hi` for the one that
/// minimizes aspect distortion. Ties prefer the area closest to `target`,
/// then larger `a`, then smaller `b`, which keeps the choice deterministic
/// and close to the image's own resolution.
fn best_grid(lo: u64, hi: u64, target: f64, ln_r: f64) -> (u32, u32) {
    let ln_tab = ln_table(hi as u32);
    let mut best: Option<((u32, u32), (f64, f64))> = None;
    for a in 1..=hi {
        let b_lo = lo.div_ceil(a).max(1);
        let b_hi = hi / a;
        for b in b_lo..=b_hi {
            let cand = (a as u32, b as u32);
            let d = distortion(&ln_tab, cand.0, cand.1, ln_r);
            let area_gap = ((a * b) as f64 - target).abs();
            let key = (d, area_gap);
            let better = match &best {
                None => true,
                Some((bg, bk)) => {
                    key < *bk
                        || (key == *bk && (cand.0 > bg.0 || (cand.0 == bg.0 && cand.1 < bg.1)))
                }
            };
            if better {
                best = Some((cand, key));
            }
        }
    }
    best.expect("grid range is non-empty").0
}

/// Choose the patch grid directly: the image resizes to `grid * patch_px`
/// and every patch becomes one token.
pub fn plan_dynamic_resolution(width: u32, height: u32, cfg: &StrategyConfig) -> Result<PatchPlan> {
    cfg.validate()?;
    if cfg.strategy != Strategy::DynamicRes {
        return Err(Error::Config(format!(
            "plan_dynamic_resolution called with {:?} config",
            cfg.strategy
        )));
    }
    check_input(width, height)?;

    let native = (width as f64 / cfg.patch_px as f64) * (height as f64 / cfg.patch_px as f64);
    let target = native.clamp(cfg.min_patches as f64, cfg.max_patches as f64);
    let ln_r = (height as f64 / width as f64).ln();
    let (gw, gh) = best_grid(cfg.min_patches as u64, cfg.max_patches as u64, target, ln_r);

    Ok(PatchPlan {
        strategy: cfg.strategy,
        source_size: (width, height),
        resized_size: (gw * cfg.patch_px, gh * cfg.patch_px),
        grid: (gw, gh),
        crops: Vec::new(),
        scales: vec![1],
        token_count: gw * gh,
        config: cfg.clone(),
    })
}

/// Resize to an exact `a x b` grid of tiles, minimizing aspect distortion.
/// Extra S2 scales reuse the same token positions via channel concatenation,
/// so the token count depends only on the tile count.
pub fn plan_dynamic_s2(width: u32, height: u32, cfg: &StrategyConfig) -> Result<PatchPlan> {
    cfg.validate()?;
    if cfg.strategy != Strategy::DynamicS2 {
        return Err(Error::Config(format!(
            "plan_dynamic_s2 called with {:?} config",
            cfg.strategy
        )));
    }
    check_input(width, height)?;

    let max_tiles = (cfg.max_tokens / cfg.tokens_per_tile) as u64;
    let tile = cfg.tile_px;
    let native = (width as f64 / tile as f64) * (height as f64 / tile as f64);
    let target = native.clamp(1.0, max_tiles as f64);
    let ln_r = (height as f64 / width as f64).ln();
    let (a, b) = best_grid(1, max_tiles, target, ln_r);

    let mut crops = Vec::with_capacity((a * b) as usize);
    for j in 0..b {
        for i in 0..a {
            crops.push(CropSpec {
                offset: (i * tile, j * tile),
                size: (tile, tile),
                pad: (0, 0),
            });
        }
    }

    Ok(PatchPlan {
        strategy: cfg.strategy,
        source_size: (width, height),
        resized_size: (a * tile, b * tile),
        grid: (a, b),
        crops,
        scales: cfg.s2_scales.clone(),
        token_count: a * b * cfg.tokens_per_tile,
        config: cfg.clone(),
    })
}

/// `round(num / den)` with exact integer arithmetic, halves up.
fn round_ratio(num: u64, den: u64) -> u64 {
    ((2 * num as u128 + den as u128) / (2 * den as u128)) as u64
}

/// Cover the (possibly downscaled) image with overlapping fixed-size crops.
///
/// The downscale factor is the largest `s <= 1` keeping the crop count within
/// budget; it is carried as an exact fraction so resize targets land on whole
/// pixels without float drift. Crops along each axis are evenly spaced from
/// edge to edge; a dimension smaller than the tile gets one letterboxed crop.
pub fn plan_multicrop(width: u32, height: u32, cfg: &StrategyConfig) -> Result<PatchPlan> {
    cfg.validate()?;
    if !matches!(cfg.strategy, Strategy::MultiCrop | Strategy::MultiCropS2) {
        return Err(Error::Config(format!(
            "plan_multicrop called with {:?} config",
            cfg.strategy
        )));
    }
    check_input(width, height)?;

    let tile = cfg.tile_px as u64;
    let (w, h) = (width as u64, height as u64);
    let max_crops = (cfg.max_tokens / cfg.tokens_per_tile) as u64;

    // Largest downscale s = p/q <= 1 such that the resulting crop grid fits
    // the budget. Candidate grids cap s at min(nx*tile/W, ny*tile/H).
    let nx_full = w.div_ceil(tile);
    let ny_full = h.div_ceil(tile);
    let (mut p, mut q) = (0u64, 1u64);
    if nx_full * ny_full <= max_crops {
        (p, q) = (1, 1);
    } else {
        for nx in 1..=nx_full {
            if nx > max_crops {
                break;
            }
            let ny = (max_crops / nx).min(ny_full);
            if ny == 0 {
                continue;
            }
            // s_cand = min(1, nx*tile/w, ny*tile/h)
            let lt = |ap: u64, aq: u64, bp: u64, bq: u64| {
                (ap as u128) * (bq as u128) < (bp as u128) * (aq as u128)
            };
            let (mut cp, mut cq) = (1u64, 1u64);
            if lt(nx * tile, w, cp, cq) {
                (cp, cq) = (nx * tile, w);
            }
            if lt(ny * tile, h, cp, cq) {
                (cp, cq) = (ny * tile, h);
            }
            if (cp as u128) * (q as u128) > (p as u128) * (cq as u128) {
                (p, q) = (cp, cq);
            }
        }
    }
    debug_assert!(p > 0, "a 1x1 grid is always feasible");

    let rw = round_ratio(p * w, q).max(1) as u32;
    let rh = round_ratio(p * h, q).max(1) as u32;
    let nx = (rw as u64).div_ceil(tile) as u32;
    let ny = (rh as u64).div_ceil(tile) as u32;

    let xs = axis_offsets(rw, cfg.tile_px, nx);
    let ys = axis_offsets(rh, cfg.tile_px, ny);
    let mut crops = Vec::with_capacity((nx * ny) as usize);
    for &(oy, pad_y) in &ys {
        for &(ox, pad_x) in &xs {
            crops.push(CropSpec {
                offset: (ox, oy),
                size: (cfg.tile_px, cfg.tile_px),
                pad: (pad_x, pad_y),
            });
        }
    }

    Ok(PatchPlan {
        strategy: cfg.strategy,
        source_size: (width, height),
        resized_size: (rw, rh),
        grid: (nx, ny),
        crops,
        scales: if cfg.strategy == Strategy::MultiCropS2 {
            cfg.s2_scales.clone()
        } else {
            vec![1]
        },
        token_count: nx * ny * cfg.tokens_per_tile,
        config: cfg.clone(),
    })
}

/// Evenly spaced crop offsets along one axis, as (offset, pad) pairs.
fn axis_offsets(dim: u32, tile: u32, n: u32) -> Vec<(u32, u32)> {
    if dim < tile {
        return vec![(0, tile - dim)];
    }
    if n == 1 {
        return vec![(0, 0)];
    }
    let span = (dim - tile) as u64;
    (0..n as u64)
        .map(|i| (round_ratio(i * span, n as u64 - 1) as u32, 0))
        .collect()
}

/// Which frame a pixel coordinate is expressed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordTarget {
    /// Fractions of the full source image.
    GlobalNormalized,
    /// Fractions of one crop's content area (letterbox padding excluded).
    CropLocal(usize),
}

/// Boundary slack when testing whether a point falls inside a crop.
const CROP_EPS: f64 = 1e-9;

struct CropFrame {
    sx: f64,
    sy: f64,
    off: (f64, f64),
    content: (f64, f64),
}

fn crop_frame(plan: &PatchPlan, index: usize) -> Result<CropFrame> {
    let crop = plan.crops.get(index).ok_or_else(|| {
        Error::Reference(format!(
            "crop index {index} out of range for a plan with {} crops",
            plan.crops.len()
        ))
    })?;
    let (cw, ch) = crop.content_size();
    Ok(CropFrame {
        sx: plan.resized_size.0 as f64 / plan.source_size.0 as f64,
        sy: plan.resized_size.1 as f64 / plan.source_size.1 as f64,
        off: (crop.offset.0 as f64, crop.offset.1 as f64),
        content: (cw as f64, ch as f64),
    })
}

fn check_in_source(plan: &PatchPlan, x: f64, y: f64) -> Result<()> {
    let (w, h) = (plan.source_size.0 as f64, plan.source_size.1 as f64);
    if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 || x > w || y > h {
        return Err(Error::Input(format!(
            "pixel ({x}, {y}) lies outside the {w}x{h} source image"
        )));
    }
    Ok(())
}

/// Map a source-space pixel point into normalized coordinates.
pub fn normalize_point(plan: &PatchPlan, x: f64, y: f64, target: CoordTarget) -> Result<NormPoint> {
    check_in_source(plan, x, y)?;
    match target {
        CoordTarget::GlobalNormalized => NormPoint::new(
            x / plan.source_size.0 as f64,
            y / plan.source_size.1 as f64,
        ),
        CoordTarget::CropLocal(i) => {
            let f = crop_frame(plan, i)?;
            let lx = x * f.sx - f.off.0;
            let ly = y * f.sy - f.off.1;
            if lx < -CROP_EPS
                || ly < -CROP_EPS
                || lx > f.content.0 + CROP_EPS
                || ly > f.content.1 + CROP_EPS
            {
                return Err(Error::OutOfCrop { x, y, crop: i });
            }
            NormPoint::new(
                (lx / f.content.0).clamp(0.0, 1.0),
                (ly / f.content.1).clamp(0.0, 1.0),
            )
        }
    }
}

/// Map a source-space pixel rect `(x, y, w, h)` into normalized coordinates.
/// For `CropLocal` both corners must fall inside the crop.
pub fn normalize_rect(
    plan: &PatchPlan,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    target: CoordTarget,
) -> Result<NormRect> {
    if w < 0.0 || h < 0.0 {
        return Err(Error::Input(format!("rect size ({w}, {h}) is negative")));
    }
    let a = normalize_point(plan, x, y, target)?;
    let b = normalize_point(plan, x + w, y + h, target)?;
    NormRect::new(a.x, a.y, b.x - a.x, b.y - a.y)
}

/// Inverse of [`normalize_point`]; returns source-space pixels.
pub fn denormalize_point(plan: &PatchPlan, p: NormPoint, target: CoordTarget) -> Result<(f64, f64)> {
    match target {
        CoordTarget::GlobalNormalized => Ok((
            p.x * plan.source_size.0 as f64,
            p.y * plan.source_size.1 as f64,
        )),
        CoordTarget::CropLocal(i) => {
            let f = crop_frame(plan, i)?;
            Ok((
                (p.x * f.content.0 + f.off.0) / f.sx,
                (p.y * f.content.1 + f.off.1) / f.sy,
            ))
        }
    }
}

/// Inverse of [`normalize_rect`]; returns a source-space `(x, y, w, h)`.
pub fn denormalize_rect(
    plan: &PatchPlan,
    r: NormRect,
    target: CoordTarget,
) -> Result<(f64, f64, f64, f64)> {
    let (x0, y0) = denormalize_point(plan, NormPoint { x: r.x, y: r.y }, target)?;
    let (x1, y1) = denormalize_point(
        plan,
        NormPoint {
            x: r.x + r.w,
            y: r.y + r.h,
        },
        target,
    )?;
    Ok((x0, y0, x1 - x0, y1 - y0))
}
