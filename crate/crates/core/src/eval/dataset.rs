//! ScreenSpot-style JSON manifests.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::geometry::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityLabel {
    Text,
    Icon,
}

impl ModalityLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Text => "text",
            Self::Icon => "icon",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Some(Self::Text),
            "icon" | "widget" | "icon/widget" => Some(Self::Icon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub image_path: PathBuf,
    pub instruction: String,
    pub gt_box: Region,
    pub modality_label: ModalityLabel,
    pub group: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BboxConvention {
    /// `[x, y, width, height]`
    #[default]
    Xywh,
    /// `[x1, y1, x2, y2]`
    Xyxy,
}

/// Manifest field names. `id`, `group` and `platform` may be absent from
/// entries: ids fall back to the entry index, groups to `"all"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub id: String,
    pub image: String,
    pub instruction: String,
    pub bbox: String,
    pub modality: String,
    pub group: String,
    pub platform: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            image: "image".into(),
            instruction: "instruction".into(),
            bbox: "bbox".into(),
            modality: "modality".into(),
            group: "group".into(),
            platform: "platform".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FormatConfig {
    pub bbox: BboxConvention,
    pub fields: FieldMap,
    /// Directory image paths are resolved against; defaults to the
    /// manifest's own directory.
    pub images_dir: Option<PathBuf>,
}

impl FormatConfig {
    /// Layout written by the synthetic generator.
    pub fn native() -> Self {
        Self::default()
    }

    /// ScreenSpot-Pro annotation files.
    pub fn screenspot_pro() -> Self {
        Self {
            bbox: BboxConvention::Xyxy,
            fields: FieldMap {
                image: "img_filename".into(),
                modality: "ui_type".into(),
                ..FieldMap::default()
            },
            images_dir: None,
        }
    }

    /// ScreenSpot / ScreenSpot-v2 annotation files.
    pub fn screenspot() -> Self {
        Self {
            bbox: BboxConvention::Xywh,
            fields: FieldMap {
                image: "img_filename".into(),
                modality: "data_type".into(),
                group: "platform".into(),
                ..FieldMap::default()
            },
            images_dir: None,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "native" => Some(Self::native()),
            "screenspot-pro" => Some(Self::screenspot_pro()),
            "screenspot" | "screenspot-v2" => Some(Self::screenspot()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadError {
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub samples: Vec<Sample>,
    pub errors: Vec<LoadError>,
}

/// Converts a raw bbox under `convention` into an integer pixel region
/// covering it (floor of the near edges, ceil of the far edges).
pub fn bbox_to_region(v: &[f64], convention: BboxConvention) -> Result<Region, String> {
    let [a, b, c, d] = <[f64; 4]>::try_from(v).map_err(|_| format!("bbox needs 4 numbers, got {}", v.len()))?;
    if ![a, b, c, d].iter().all(|x| x.is_finite()) {
        return Err("bbox contains non-finite values".into());
    }
    let (x1, y1, x2, y2) = match convention {
        BboxConvention::Xywh => (a, b, a + c, b + d),
        BboxConvention::Xyxy => (a, b, c, d),
    };
    if x1 < 0.0 || y1 < 0.0 {
        return Err(format!("bbox has negative origin ({x1}, {y1})"));
    }
    let (x0, y0) = (x1.floor(), y1.floor());
    let (w, h) = (x2.ceil() - x0, y2.ceil() - y0);
    if w < 1.0 || h < 1.0 || x2 > u32::MAX as f64 || y2 > u32::MAX as f64 {
        return Err(format!("bbox {v:?} is empty or out of range"));
    }
    Ok(Region { x: x0 as u32, y: y0 as u32, width: w as u32, height: h as u32 })
}

fn field_str(entry: &Value, key: &str) -> Option<String> {
    match entry.get(key)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Loads and validates a manifest. Entries that fail validation (missing
/// fields, unreadable image, box outside the image, unknown modality,
/// duplicate id) are reported in [`LoadedDataset::errors`] and skipped.
pub fn load_dataset(manifest: &Path, fmt: &FormatConfig) -> Result<LoadedDataset, EvalError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| EvalError::Manifest(format!("{}: {e}", manifest.display())))?;
    let entries: Vec<Value> = serde_json::from_str(&text)
        .map_err(|e| EvalError::Manifest(format!("{}: expected a JSON array: {e}", manifest.display())))?;
    let base = fmt
        .images_dir
        .clone()
        .unwrap_or_else(|| manifest.parent().map(Path::to_path_buf).unwrap_or_default());

    let mut out = LoadedDataset::default();
    let mut seen = HashSet::new();
    for (index, entry) in entries.iter().enumerate() {
        let id = field_str(entry, &fmt.fields.id);
        match parse_entry(entry, index, id.clone(), fmt, &base) {
            Ok(sample) if !seen.insert(sample.id.clone()) => {
                out.errors.push(LoadError { index, id, reason: format!("duplicate id `{}`", sample.id) });
            }
            Ok(sample) => out.samples.push(sample),
            Err(reason) => out.errors.push(LoadError { index, id, reason }),
        }
    }
    Ok(out)
}

fn parse_entry(entry: &Value, index: usize, id: Option<String>, fmt: &FormatConfig, base: &Path) -> Result<Sample, String> {
    let f = &fmt.fields;
    let require = |key: &str| field_str(entry, key).ok_or_else(|| format!("missing or non-string field `{key}`"));
    let image = require(&f.image)?;
    let instruction = require(&f.instruction)?;
    if instruction.trim().is_empty() {
        return Err("instruction is empty".into());
    }
    let raw_modality = require(&f.modality)?;
    let modality_label =
        ModalityLabel::parse(&raw_modality).ok_or_else(|| format!("unrecognized modality label `{raw_modality}`"))?;
    let bbox: Vec<f64> = entry
        .get(&f.bbox)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("missing array field `{}`", f.bbox))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| "bbox entries must be numbers".to_string()))
        .collect::<Result<_, _>>()?;
    let gt_box = bbox_to_region(&bbox, fmt.bbox)?;

    let image_path = base.join(&image);
    let (w, h) = image::ImageReader::open(&image_path)
        .and_then(|r| r.with_guessed_format())
        .map_err(|e| format!("{}: {e}", image_path.display()))?
        .into_dimensions()
        .map_err(|e| format!("{}: {e}", image_path.display()))?;
    if gt_box.right() > w as u64 || gt_box.bottom() > h as u64 {
        return Err(format!("gt box {gt_box} exceeds {w}x{h} image"));
    }

    Ok(Sample {
        id: id.unwrap_or_else(|| format!("{index:06}")),
        image_path,
        instruction,
        gt_box,
        modality_label,
        group: field_str(entry, &f.group).unwrap_or_else(|| "all".into()),
        platform: field_str(entry, &f.platform),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_conventions_agree() {
        let a = bbox_to_region(&[100.0, 50.0, 40.0, 30.0], BboxConvention::Xywh).unwrap();
        let b = bbox_to_region(&[100.0, 50.0, 140.0, 80.0], BboxConvention::Xyxy).unwrap();
        assert_eq!(a, Region::new(100, 50, 40, 30).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn fractional_boxes_expand_outward() {
        let r = bbox_to_region(&[10.4, 5.6, 20.2, 30.0], BboxConvention::Xyxy).unwrap();
        assert_eq!(r, Region::new(10, 5, 11, 25).unwrap());
    }

    #[test]
    fn bad_boxes() {
        assert!(bbox_to_region(&[1.0, 2.0, 3.0], BboxConvention::Xywh).is_err());
        assert!(bbox_to_region(&[-1.0, 2.0, 3.0, 4.0], BboxConvention::Xywh).is_err());
        assert!(bbox_to_region(&[5.0, 5.0, 5.0, 9.0], BboxConvention::Xyxy).is_err());
        assert!(bbox_to_region(&[f64::NAN, 5.0, 5.0, 9.0], BboxConvention::Xyxy).is_err());
    }

    #[test]
    fn modality_aliases() {
        assert_eq!(ModalityLabel::parse("Icon/Widget"), Some(ModalityLabel::Icon));
        assert_eq!(ModalityLabel::parse("text"), Some(ModalityLabel::Text));
        assert_eq!(ModalityLabel::parse("image"), None);
    }
}
