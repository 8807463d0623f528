use image::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::{Point, Region, Size};
use crate::raster::{draw_label, fill_rect, label_width, stroke_rect, Rgb};

const KEYWORDS: &[&str] = &[
    "Edit", "Save", "Open", "Close", "Search", "Print", "Share", "Delete", "Copy", "Paste", "Undo", "Redo", "Help",
    "Export", "Import", "Zoom", "Find", "Reload", "Send", "Home", "Back", "Next", "Menu", "Mail", "Play", "Stop",
    "Sync", "Lock", "Crop", "Tag", "Link", "Pin",
];

const FILLS: &[[u8; 3]] = &[
    [66, 133, 244],
    [219, 68, 55],
    [244, 180, 0],
    [15, 157, 88],
    [171, 71, 188],
    [0, 172, 193],
    [255, 112, 67],
    [158, 157, 36],
    [92, 107, 192],
    [141, 110, 99],
];

const LABEL_SCALE: i64 = 2;
const BACKGROUND: Rgb<u8> = Rgb([238, 238, 238]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Text,
    Icon,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthElement {
    #[serde(rename = "box")]
    pub bbox: Region,
    pub kind: ElementKind,
    pub label: String,
    pub is_target: bool,
}

impl SynthElement {
    pub fn center(&self) -> Point {
        self.bbox.center()
    }
}

/// A generated screen. `distractor_index` points at a text element that
/// carries the instruction keyword but is not the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthScreen {
    pub size: Size,
    pub elements: Vec<SynthElement>,
    pub target_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distractor_index: Option<usize>,
    pub instruction: String,
}

impl SynthScreen {
    pub fn target(&self) -> &SynthElement {
        &self.elements[self.target_index]
    }

    pub fn distractor(&self) -> Option<&SynthElement> {
        self.distractor_index.map(|i| &self.elements[i])
    }

    pub fn validate(&self) -> Result<(), String> {
        let frame = Region::full(self.size);
        if self.elements.iter().filter(|e| e.is_target).count() != 1 {
            return Err("screen needs exactly one target".into());
        }
        if !self.elements.get(self.target_index).is_some_and(|e| e.is_target) {
            return Err("target_index does not point at the target".into());
        }
        if let Some(e) = self.elements.iter().find(|e| !frame.contains_region(&e.bbox)) {
            return Err(format!("element box {} outside {}x{} screen", e.bbox, self.size.width, self.size.height));
        }
        if self.target().bbox.size().min_side() < 8 {
            return Err("target box is smaller than 8 px".into());
        }
        if let Some(d) = self.distractor() {
            if d.is_target || d.kind != ElementKind::Text || d.label != self.target().label {
                return Err("distractor must be a non-target text element sharing the target label".into());
            }
        }
        Ok(())
    }
}

/// Layout bounds for generated screens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub width: u32,
    pub height: u32,
    /// Element count per screen, target and distractor included.
    pub min_elements: usize,
    pub max_elements: usize,
    pub icon_min_side: u32,
    pub icon_max_side: u32,
    pub text_min_height: u32,
    pub text_max_height: u32,
    /// Fraction of screens carrying a text distractor. Those screens always
    /// have an icon target.
    pub distractor_rate: f64,
    /// Clear gap kept between elements and from the screen border.
    pub gap: u32,
    /// Layout restarts before giving up.
    pub max_attempts: u32,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            width: 1000,
            height: 600,
            min_elements: 6,
            max_elements: 12,
            icon_min_side: 48,
            icon_max_side: 80,
            text_min_height: 40,
            text_max_height: 56,
            distractor_rate: 0.0,
            gap: 8,
            max_attempts: 50,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("screen {}x{} is too small", self.width, self.height));
        }
        if self.min_elements < 2 || self.min_elements > self.max_elements {
            return bad(format!("element range {}..={} is invalid (min 2)", self.min_elements, self.max_elements));
        }
        if self.icon_min_side < 8 || self.icon_min_side > self.icon_max_side {
            return bad(format!("icon side range {}..={} is invalid (min 8)", self.icon_min_side, self.icon_max_side));
        }
        if self.text_min_height < 8 || self.text_min_height > self.text_max_height {
            return bad(format!(
                "text height range {}..={} is invalid (min 8)",
                self.text_min_height, self.text_max_height
            ));
        }
        if !(0.0..=1.0).contains(&self.distractor_rate) {
            return bad(format!("distractor_rate must lie in [0, 1], got {}", self.distractor_rate));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive".into());
        }
        Ok(())
    }
}

fn element_size(rng: &mut ChaCha8Rng, kind: ElementKind, label: &str, cfg: &GenConfig) -> (u32, u32) {
    match kind {
        ElementKind::Icon => {
            let s = rng.gen_range(cfg.icon_min_side..=cfg.icon_max_side);
            (s, s)
        }
        ElementKind::Text => {
            let h = rng.gen_range(cfg.text_min_height..=cfg.text_max_height);
            (label_width(label, LABEL_SCALE) as u32 + 24, h)
        }
    }
}

fn overlaps(a: &Region, b: &Region, gap: u32) -> bool {
    let g = gap as u64;
    (a.x as u64) < b.right() + g && (b.x as u64) < a.right() + g && (a.y as u64) < b.bottom() + g && (b.y as u64) < a.bottom() + g
}

fn place(rng: &mut ChaCha8Rng, placed: &[SynthElement], (w, h): (u32, u32), cfg: &GenConfig) -> Option<Region> {
    let (gap, sw, sh) = (cfg.gap, cfg.width, cfg.height);
    if w + 2 * gap > sw || h + 2 * gap > sh {
        return None;
    }
    for _ in 0..64 {
        let x = rng.gen_range(gap..=sw - gap - w);
        let y = rng.gen_range(gap..=sh - gap - h);
        let r = Region { x, y, width: w, height: h };
        if !placed.iter().any(|e| overlaps(&e.bbox, &r, gap)) {
            return Some(r);
        }
    }
    None
}

fn try_layout(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Option<SynthScreen> {
    let mut words: Vec<&str> = KEYWORDS.to_vec();
    words.shuffle(rng);
    let keyword = words[0];
    let fillers = &words[1..];

    let with_distractor = rng.gen_bool(cfg.distractor_rate);
    let target_kind = if with_distractor || rng.gen_bool(0.5) { ElementKind::Icon } else { ElementKind::Text };
    let count = rng.gen_range(cfg.min_elements..=cfg.max_elements);

    let mut elements: Vec<SynthElement> = Vec::with_capacity(count);
    let add = |rng: &mut ChaCha8Rng, elements: &mut Vec<SynthElement>, kind, label: &str, is_target| {
        let size = element_size(rng, kind, label, cfg);
        let bbox = place(rng, elements, size, cfg)?;
        elements.push(SynthElement { bbox, kind, label: label.to_string(), is_target });
        Some(())
    };
    add(rng, &mut elements, target_kind, keyword, true)?;
    if with_distractor {
        add(rng, &mut elements, ElementKind::Text, keyword, false)?;
    }
    for label in fillers.iter().take(count.saturating_sub(elements.len())) {
        let kind = if rng.gen_bool(0.5) { ElementKind::Icon } else { ElementKind::Text };
        add(rng, &mut elements, kind, label, false)?;
    }

    // Shuffle so the target does not always come first in element order.
    let mut order: Vec<usize> = (0..elements.len()).collect();
    order.shuffle(rng);
    let elements: Vec<SynthElement> = order.iter().map(|&i| elements[i].clone()).collect();
    let target_index = order.iter().position(|&i| i == 0).expect("target present");
    let distractor_index = with_distractor.then(|| order.iter().position(|&i| i == 1).expect("distractor present"));

    let noun = match target_kind {
        ElementKind::Icon => "icon",
        ElementKind::Text => "button",
    };
    Some(SynthScreen {
        size: Size { width: cfg.width, height: cfg.height },
        elements,
        target_index,
        distractor_index,
        instruction: format!("click the {keyword} {noun}"),
    })
}

/// Deterministic screen layout for `seed`.
pub fn generate_screen(seed: u64, cfg: &GenConfig) -> Result<SynthScreen, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cfg.max_attempts {
        if let Some(screen) = try_layout(&mut rng, cfg) {
            debug_assert!(screen.validate().is_ok());
            return Ok(screen);
        }
    }
    Err(SynthError::Infeasible { seed, attempts: cfg.max_attempts })
}

/// Flat-color rendering: text elements show their label, icons show the
/// label's initial on a darker tile.
pub fn render_screen(screen: &SynthScreen) -> RgbImage {
    let mut img = RgbImage::from_pixel(screen.size.width, screen.size.height, BACKGROUND);
    for (i, e) in screen.elements.iter().enumerate() {
        let b = e.bbox;
        let (x, y, w, h) = (b.x as i64, b.y as i64, b.width as i64, b.height as i64);
        let fill = FILLS[(i + e.label.len()) % FILLS.len()];
        match e.kind {
            ElementKind::Text => {
                fill_rect(&mut img, x, y, w, h, Rgb([fill[0] / 4 + 190, fill[1] / 4 + 190, fill[2] / 4 + 190]));
                stroke_rect(&mut img, x, y, w, h, 1, Rgb(fill));
                let tx = x + (w - label_width(&e.label, LABEL_SCALE)) / 2;
                draw_label(&mut img, tx, y + (h - 8 * LABEL_SCALE) / 2, &e.label, Rgb([30, 30, 30]), LABEL_SCALE);
            }
            ElementKind::Icon => {
                fill_rect(&mut img, x, y, w, h, Rgb(fill));
                let glyph: String = e.label.chars().take(1).collect();
                let scale = (w / 16).max(1);
                let off = (w - 8 * scale) / 2;
                draw_label(&mut img, x + off, y + (h - 8 * scale) / 2, &glyph, Rgb([255, 255, 255]), scale);
            }
        }
    }
    img
}
