//! Extraction of click points and A/B answers from free-form model text.

use std::sync::OnceLock;

use regex::Regex;

use super::{BackendError, Candidate};
use crate::geometry::{denormalize, CoordConvention, Point, Region, Size};

const NUM: &str = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?";

fn keyed_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let key = |k: &str| format!(r#"\b{k}\b["']?\s*[=:]\s*["']?\s*({NUM})"#);
        Regex::new(&format!(r"(?is){}.*?{}", key("x"), key("y"))).unwrap()
    })
}

fn group_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"[\(\[]\s*{NUM}(?:\s*,\s*{NUM})*\s*[\)\]]")).unwrap())
}

fn paired_box_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let pair = format!(r"[\(\[]\s*({NUM})\s*,\s*({NUM})\s*[\)\]]");
        Regex::new(&format!(r"{pair}\s*,?\s*{pair}")).unwrap()
    })
}

fn bare_pair_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(&format!(r"(?:^|[^\w.,])({NUM})\s*,\s*({NUM})(?:$|[^\w.,])")).unwrap())
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(NUM).unwrap())
}

/// Pulls the first coordinate pair out of `raw`, denormalizes it under
/// `convention` and clamps it into `frame`.
///
/// Recognized, in order of preference: keyed pairs (`x=.., y=..`, JSON
/// objects with `x`/`y` fields), two adjacent bracketed pairs forming a box,
/// a bracketed group of two numbers (a point) or four numbers (a box whose
/// center is taken), and finally a bare `a, b` pair.
pub fn parse_point(raw: &str, convention: CoordConvention, frame: Size) -> Result<Point, BackendError> {
    let p = extract(raw).ok_or_else(|| BackendError::parse_failure(raw))?;
    if !p.is_finite() {
        return Err(BackendError::parse_failure(raw));
    }
    let p = denormalize(p, convention, frame);
    Ok(Region::full(frame).clamp_local(p))
}

fn extract(raw: &str) -> Option<Point> {
    if let Some(c) = keyed_re().captures(raw) {
        return Some(Point::new(c[1].parse().ok()?, c[2].parse().ok()?));
    }
    let first_group = group_re().find(raw);
    if let Some(c) = paired_box_re().captures(raw) {
        // only when the box starts at the first bracketed group
        if first_group.map(|m| m.start()) == c.get(0).map(|m| m.start()) {
            let v: Vec<f64> = (1..=4).map(|i| c[i].parse().unwrap_or(f64::NAN)).collect();
            return Some(box_center(&v));
        }
    }
    for m in group_re().find_iter(raw) {
        let v: Vec<f64> = number_re()
            .find_iter(m.as_str())
            .filter_map(|n| n.as_str().parse().ok())
            .collect();
        match v.len() {
            2 => return Some(Point::new(v[0], v[1])),
            4 => return Some(box_center(&v)),
            _ => continue,
        }
    }
    let stripped = group_re().replace_all(raw, " ");
    let c = bare_pair_re().captures(&stripped)?;
    Some(Point::new(c[1].parse().ok()?, c[2].parse().ok()?))
}

fn box_center(v: &[f64]) -> Point {
    Point::new((v[0] + v[2]) / 2.0, (v[1] + v[3]) / 2.0)
}

fn choice_patterns() -> &'static [Regex; 2] {
    static RE: OnceLock<[Regex; 2]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            Regex::new(r#"\b(?i:answer|choice|option|candidate|select|pick)\b\s*(?:is|:)?\s*[\("'\[]?\s*\b([AB])\b"#).unwrap(),
            Regex::new(r"\b([AB])\b").unwrap(),
        ]
    })
}

/// Maps a selection answer onto a candidate: "A" is the text candidate and
/// "B" the icon candidate. An explicit "answer: X" form wins; otherwise the
/// answer must name exactly one of the two labels as a standalone token.
pub fn parse_choice(raw: &str) -> Result<Candidate, BackendError> {
    let label = |s: &str| match s.to_ascii_uppercase().as_str() {
        "A" => Candidate::TextCandidate,
        _ => Candidate::IconCandidate,
    };
    let [explicit, loose] = choice_patterns();
    if let Some(c) = explicit.captures(raw) {
        return Ok(label(&c[1]));
    }
    let mut found: Vec<&str> = loose.captures_iter(raw).map(|c| c.get(1).unwrap().as_str()).collect();
    found.sort_unstable();
    found.dedup();
    match found.as_slice() {
        [one] => Ok(label(one)),
        _ => Err(BackendError::parse_failure(raw)),
    }
}

/// Real-world model output styles with the pixel point they must parse to
/// under the given convention on a 1000x600 frame.
pub const POSITIVE_CORPUS: &[(&str, CoordConvention, (f64, f64))] = &[
    ("(0.52, 0.31)", CoordConvention::Normalized01, (520.0, 186.0)),
    ("[512, 320]", CoordConvention::Pixels, (512.0, 320.0)),
    ("x=120, y=340", CoordConvention::Pixels, (120.0, 340.0)),
    (r#"{"x": 30, "y": 40}"#, CoordConvention::Pixels, (30.0, 40.0)),
    ("(100, 100, 300, 200)", CoordConvention::Pixels, (200.0, 150.0)),
    ("[100,100,300,200]", CoordConvention::Pixels, (200.0, 150.0)),
    ("<|box_start|>(100,200),(300,400)<|box_end|>", CoordConvention::Normalized1000, (200.0, 180.0)),
    ("click(x=0.25, y=0.75)", CoordConvention::Normalized01, (250.0, 450.0)),
    ("The element is located at (640, 360).", CoordConvention::Pixels, (640.0, 360.0)),
    ("pyautogui.click(x=512, y=384)", CoordConvention::Pixels, (512.0, 384.0)),
    (r#"{"point": [200, 300]}"#, CoordConvention::Pixels, (200.0, 300.0)),
    ("```json\n{\"x\": 0.5, \"y\": 0.2}\n```", CoordConvention::Normalized01, (500.0, 120.0)),
    (r#"<point x="12.5" y="40">Save</point>"#, CoordConvention::Pixels, (12.5, 40.0)),
    ("Answer: 300, 200", CoordConvention::Pixels, (300.0, 200.0)),
    ("{'x': 1200, 'y': 50}", CoordConvention::Pixels, (1000.0, 50.0)),
];

/// Outputs that carry no usable coordinate pair.
pub const NEGATIVE_CORPUS: &[&str] = &[
    "I cannot find it",
    "",
    "(12)",
    "x=5",
    "coordinates: unknown",
    "(NaN, 3)",
    "[1, 2, 3]",
    "The button is in the top-left corner.",
    "version 1.2.3",
];
