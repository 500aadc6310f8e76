//! Seeded generators for synthetic multi-image records: scrambled-caption
//! ordering, caption-to-image matching, and "what's changed?" frame pairs
//! with a pixel-diff fallback describer.

use image::RgbaImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curate::JudgeClient;
use crate::geometry::NormRect;
use crate::record::{Annotation, AnnotationKind, Role, SampleRecord, Turn};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Images presented in the main round of a group task.
    pub group_size: usize,
    /// Chance of sprinkling one extra image and request after the main round.
    pub insert_prob: f64,
    pub seed: u64,
    /// Per-pixel max-channel delta (0..=255) above which a pixel counts as
    /// changed.
    pub diff_threshold: u8,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            group_size: 5,
            insert_prob: 0.2,
            seed: 0,
            diff_threshold: 16,
        }
    }
}

impl SynthConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config("group_size must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.insert_prob) || !self.insert_prob.is_finite() {
            return Err(Error::Config(format!(
                "insert_prob {} outside [0, 1]",
                self.insert_prob
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionedImage {
    pub image: String,
    pub caption: String,
}

/// An ordered run of 2 or 3 frames from the same screen/session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub image: String,
    pub timestamp: f64,
}

impl FrameSequence {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.frames.len()) {
            return Err(Error::Input(format!(
                "frame sequence has {} frames, need 2 or 3",
                self.frames.len()
            )));
        }
        Ok(())
    }
}

fn check_items(items: &[CaptionedImage]) -> Result<()> {
    if items.len() < 2 {
        return Err(Error::Input(format!(
            "need at least 2 captioned images, got {}",
            items.len()
        )));
    }
    if let Some(empty) = items.iter().find(|it| it.caption.trim().is_empty()) {
        return Err(Error::Input(format!(
            "caption for image {} is empty",
            empty.image
        )));
    }
    Ok(())
}

fn image_tag_block(n: usize) -> String {
    (1..=n)
        .map(|i| format!("<image_{i}>"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Present a group of images, then request their captions in seeded random
/// order; the gold answer pairs every request with its source caption.
/// With probability `insert_prob` (and a spare item available) one extra
/// image and request follow the main round as a second conversation turn.
pub fn synth_scrambled(items: &[CaptionedImage], cfg: &SynthConfig) -> Result<SampleRecord> {
    cfg.validate()?;
    check_items(items)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = items.len().min(cfg.group_size);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let insert_extra = rng.random::<f64>() < cfg.insert_prob && items.len() > n;

    let requests = order
        .iter()
        .enumerate()
        .map(|(pos, &src)| format!("{}. Describe image {}.", pos + 1, src + 1))
        .collect::<Vec<_>>()
        .join("\n");
    let present = format!(
        "You are given {n} images:\n{}\n\nAnswer each request in order:\n{requests}",
        image_tag_block(n)
    );
    let main_answer = order
        .iter()
        .enumerate()
        .map(|(pos, &src)| format!("{}. {}", pos + 1, items[src].caption))
        .collect::<Vec<_>>()
        .join("\n");

    let mut images: Vec<String> = items[..n].iter().map(|it| it.image.clone()).collect();
    let mut conversations = vec![Turn { role: Role::User, text: present }];
    let mut gold_order: Vec<usize> = order.iter().map(|&i| i + 1).collect();
    let final_text;
    if insert_extra {
        images.push(items[n].image.clone());
        conversations.push(Turn { role: Role::Assistant, text: main_answer });
        conversations.push(Turn {
            role: Role::User,
            text: format!(
                "One more image:\n<image_{}>\n\nDescribe image {}.",
                n + 1,
                n + 1
            ),
        });
        gold_order.push(n + 1);
        final_text = items[n].caption.clone();
    } else {
        final_text = main_answer;
    }

    let mut rec = SampleRecord::direct(format!("scrambled-{:016x}", cfg.seed), final_text);
    rec.images = images;
    rec.conversations = conversations;
    rec.meta_mut().insert("synth".into(), "scrambled_captions".into());
    rec.meta_mut().insert("seed".into(), cfg.seed.into());
    rec.meta_mut()
        .insert("order".into(), serde_json::json!(gold_order));
    Ok(rec)
}

fn normalized_caption(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Present images, then a seeded shuffle of their captions labeled A, B, C…;
/// the gold answer is the mapping from caption slot to image index.
pub fn synth_caption_match(items: &[CaptionedImage], cfg: &SynthConfig) -> Result<SampleRecord> {
    cfg.validate()?;
    check_items(items)?;
    for (i, a) in items.iter().enumerate() {
        for b in &items[i + 1..] {
            if normalized_caption(&a.caption) == normalized_caption(&b.caption) {
                return Err(Error::Input(format!(
                    "duplicate caption \"{}\" makes the matching ambiguous",
                    a.caption
                )));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = items.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let slot_label = |slot: usize| char::from(b'A' + (slot % 26) as u8);
    let caption_list = order
        .iter()
        .enumerate()
        .map(|(slot, &src)| format!("{}. {}", slot_label(slot), items[src].caption))
        .collect::<Vec<_>>()
        .join("\n");
    let present = format!(
        "You are given {n} images:\n{}\n\nMatch each caption to its image:\n{caption_list}",
        image_tag_block(n)
    );
    let gold: Vec<usize> = order.iter().map(|&src| src + 1).collect();
    let final_text = gold
        .iter()
        .enumerate()
        .map(|(slot, &img)| format!("{} -> image {img}", slot_label(slot)))
        .collect::<Vec<_>>()
        .join("\n");

    let mut rec = SampleRecord::direct(format!("match-{:016x}", cfg.seed), final_text);
    rec.images = items.iter().map(|it| it.image.clone()).collect();
    rec.conversations = vec![Turn { role: Role::User, text: present }];
    rec.meta_mut().insert("synth".into(), "caption_match".into());
    rec.meta_mut().insert("seed".into(), cfg.seed.into());
    rec.meta_mut().insert("gold".into(), serde_json::json!(gold));
    Ok(rec)
}

/// Tightest normalized bounding rect over pixels whose max RGB-channel
/// absolute delta strictly exceeds `cfg.diff_threshold`; `None` when the
/// images differ nowhere.
pub fn diff_region(a: &RgbaImage, b: &RgbaImage, cfg: &SynthConfig) -> Result<Option<NormRect>> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::Input(format!(
            "image sizes differ: {:?} vs {:?}",
            a.dimensions(),
            b.dimensions()
        )));
    }
    let (w, h) = a.dimensions();
    let threshold = cfg.diff_threshold;
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (u32::MAX, u32::MAX, 0u32, 0u32);
    let mut any = false;
    for (pa, pb) in a.pixels().zip(b.pixels()) {
        let delta = pa.0[..3]
            .iter()
            .zip(&pb.0[..3])
            .map(|(x, y)| x.abs_diff(*y))
            .max()
            .unwrap_or(0);
        if delta > threshold {
            any = true;
        }
    }
    if !any {
        return Ok(None);
    }
    for (x, y, pa) in a.enumerate_pixels() {
        let pb = b.get_pixel(x, y);
        let delta = pa.0[..3]
            .iter()
            .zip(&pb.0[..3])
            .map(|(u, v)| u.abs_diff(*v))
            .max()
            .unwrap_or(0);
        if delta > threshold {
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
        }
    }
    Ok(Some(NormRect::new(
        min_x as f64 / w as f64,
        min_y as f64 / h as f64,
        (max_x + 1 - min_x) as f64 / w as f64,
        (max_y + 1 - min_y) as f64 / h as f64,
    )?))
}

pub fn load_image(path: &str) -> Result<RgbaImage> {
    Ok(image::open(path)
        .map_err(|e| Error::Input(format!("cannot load image {path}: {e}")))?
        .to_rgba8())
}

fn describe_change(rect: Option<&NormRect>) -> String {
    match rect {
        Some(r) => format!(
            "The changed region covers ({}, {}, {}, {}) in normalized coordinates.",
            r.x, r.y, r.w, r.h
        ),
        None => "No visible change.".to_string(),
    }
}

/// Build a "what's changed?" record over consecutive frames. Answers come
/// from the describer when given, otherwise from [`diff_region`] rendered as
/// a sentence (plus a rect annotation). A triple yields two QA rounds.
pub fn synth_whats_changed(
    seq: &FrameSequence,
    describer: Option<&dyn JudgeClient>,
    cfg: &SynthConfig,
) -> Result<SampleRecord> {
    cfg.validate()?;
    seq.validate()?;

    let mut conversations = Vec::new();
    let mut annotations: Vec<Annotation> = Vec::new();
    let mut last_answer = String::new();
    for i in 0..seq.frames.len() - 1 {
        let (fa, fb) = (&seq.frames[i], &seq.frames[i + 1]);
        let question = format!(
            "Here are two sequential screenshots, captured at t={} and t={}: <image_{}> <image_{}>\nWhat changed between them?",
            fa.timestamp,
            fb.timestamp,
            i + 1,
            i + 2
        );
        let answer = match describer {
            Some(judge) => {
                judge.generate(&question, &[fa.image.clone(), fb.image.clone()])?
            }
            None => {
                let a = load_image(&fa.image)?;
                let b = load_image(&fb.image)?;
                let rect = diff_region(&a, &b, cfg)?;
                if let Some(r) = &rect {
                    annotations.push(Annotation {
                        kind: AnnotationKind::Rect,
                        coords: vec![r.x, r.y, r.w, r.h],
                        label: format!("changed_region_{}_{}", i + 1, i + 2),
                    });
                }
                describe_change(rect.as_ref())
            }
        };
        if i > 0 {
            conversations.push(Turn { role: Role::Assistant, text: last_answer.clone() });
        }
        conversations.push(Turn { role: Role::User, text: question });
        last_answer = answer;
    }

    let mut rec = SampleRecord::direct(format!("whats-changed-{:016x}", cfg.seed), last_answer);
    rec.images = seq.frames.iter().map(|f| f.image.clone()).collect();
    rec.conversations = conversations;
    if !annotations.is_empty() {
        rec.annotations = Some(annotations);
    }
    rec.meta_mut().insert("synth".into(), "whats_changed".into());
    rec.meta_mut().insert("seed".into(), cfg.seed.into());
    Ok(rec)
}
