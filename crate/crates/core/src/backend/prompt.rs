//! Prompt templates. Placeholders are substituted textually:
//! `{instruction}`, `{width}`, `{height}` for point prediction and
//! `{instruction}`, `{ax}`, `{ay}`, `{bx}`, `{by}` for selection.

use serde::{Deserialize, Serialize};

use super::ModalityTag;
use crate::geometry::{Point, Size};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplates {
    pub text: String,
    pub icon: String,
    pub generic: String,
    pub select: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            text: "Locate the text element that the instruction refers to. Consider only text \
                   labels and ignore icons and other graphical widgets.\n\
                   Instruction: {instruction}\n\
                   The image is {width}x{height} pixels. Answer with the click point as (x, y)."
                .into(),
            icon: "Locate the icon or widget that the instruction refers to. Ignore text \
                   elements, even text that repeats words from the instruction.\n\
                   Instruction: {instruction}\n\
                   The image is {width}x{height} pixels. Answer with the click point as (x, y)."
                .into(),
            generic: "Locate the interface element that the instruction refers to.\n\
                      Instruction: {instruction}\n\
                      The image is {width}x{height} pixels. Answer with the click point as (x, y)."
                .into(),
            select: "Two candidate click points are marked on the screenshot. \
                     A is at ({ax}, {ay}); B is at ({bx}, {by}).\n\
                     Instruction: {instruction}\n\
                     Which candidate carries out the instruction? Answer with a single letter, A or B."
                .into(),
        }
    }
}

impl PromptTemplates {
    pub fn for_modality(&self, modality: ModalityTag) -> &str {
        match modality {
            ModalityTag::Text => &self.text,
            ModalityTag::Icon => &self.icon,
            ModalityTag::Generic => &self.generic,
        }
    }

    pub fn render_predict(&self, modality: ModalityTag, instruction: &str, frame: Size) -> String {
        self.for_modality(modality)
            .replace("{width}", &frame.width.to_string())
            .replace("{height}", &frame.height.to_string())
            .replace("{instruction}", instruction)
    }

    pub fn render_select(&self, instruction: &str, a: Point, b: Point) -> String {
        self.select
            .replace("{ax}", &format!("{:.1}", a.x))
            .replace("{ay}", &format!("{:.1}", a.y))
            .replace("{bx}", &format!("{:.1}", b.x))
            .replace("{by}", &format!("{:.1}", b.y))
            .replace("{instruction}", instruction)
    }
}
