use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Prompts per category.
pub const HINT_COUNT: usize = 5;
/// Placeholder substituted with each hint.
pub const HINT_SLOT: &str = "<sys_hint>";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptCategory {
    Brightness,
    Noise,
}

/// A template with one `<sys_hint>` slot and five graded hints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSet {
    pub category: PromptCategory,
    pub template: String,
    pub hints: Vec<String>,
}

impl PromptSet {
    pub fn new(category: PromptCategory, template: impl Into<String>, hints: Vec<String>) -> Result<Self> {
        let set = Self {
            category,
            template: template.into(),
            hints,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn default_brightness() -> Self {
        Self {
            category: PromptCategory::Brightness,
            template: "This is a(an) <sys_hint> photo.".into(),
            hints: ["very dark", "dark", "normal-brightness", "bright", "very bright"]
                .map(String::from)
                .to_vec(),
        }
    }

    pub fn default_noise() -> Self {
        Self {
            category: PromptCategory::Noise,
            template: "This is a photo with <sys_hint> noise.".into(),
            hints: ["no", "little", "moderate", "heavy", "severe"]
                .map(String::from)
                .to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let slots = self.template.matches(HINT_SLOT).count();
        if slots != 1 {
            return Err(Error::Prompt(format!(
                "template `{}` has {slots} `{HINT_SLOT}` slots, expected 1",
                self.template
            )));
        }
        if self.hints.len() != HINT_COUNT {
            return Err(Error::Prompt(format!(
                "{} hints given, expected {HINT_COUNT}",
                self.hints.len()
            )));
        }
        let rendered = self.render_unchecked();
        for (i, a) in rendered.iter().enumerate() {
            if rendered[..i].contains(a) {
                return Err(Error::Prompt(format!("duplicate prompt `{a}`")));
            }
        }
        Ok(())
    }

    /// The five prompts in hint order.
    pub fn render(&self) -> Result<Vec<String>> {
        self.validate()?;
        Ok(self.render_unchecked())
    }

    fn render_unchecked(&self) -> Vec<String> {
        self.hints
            .iter()
            .map(|h| self.template.replace(HINT_SLOT, h))
            .collect()
    }
}

/// The brightness and noise prompt sets used by one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Prompts {
    pub brightness: PromptSet,
    pub noise: PromptSet,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            brightness: PromptSet::default_brightness(),
            noise: PromptSet::default_noise(),
        }
    }
}

impl Prompts {
    pub fn validate(&self) -> Result<()> {
        if self.brightness.category != PromptCategory::Brightness {
            return Err(Error::Prompt("brightness set has noise category".into()));
        }
        if self.noise.category != PromptCategory::Noise {
            return Err(Error::Prompt("noise set has brightness category".into()));
        }
        self.brightness.validate()?;
        self.noise.validate()
    }

    /// True when either set still uses the built-in placeholder hints.
    pub fn uses_placeholder_hints(&self) -> bool {
        self.brightness.hints == PromptSet::default_brightness().hints
            || self.noise.hints == PromptSet::default_noise().hints
    }
}
