use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lang::Lang;

/// Surfaces of one item in one language. Index 0 is the default label,
/// indices >= 1 are aliases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangSurfaces {
    pub lang: Lang,
    pub surfaces: Vec<String>,
}

/// Per-language label and alias table for entities and relations.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Lexicon {
    ids: Vec<String>,
    rows: Vec<Vec<LangSurfaces>>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids && self.rows == other.rows
    }
}

/// Trims and collapses internal whitespace runs to single spaces. Returns
/// `None` for strings that are empty after trimming.
pub fn normalize_surface(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    (!out.is_empty()).then_some(out)
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an item. `entries` maps each language to `[label, aliases...]`;
    /// surfaces are normalized, empties and duplicates dropped, and each list
    /// truncated to `cap` entries. Languages whose label is missing are
    /// skipped, since an alias is never promoted to a default label.
    ///
    /// Returns `false` if the id is already present.
    pub fn insert<I>(&mut self, id: &str, entries: I, cap: usize) -> bool
    where
        I: IntoIterator<Item = (Lang, Option<String>, Vec<String>)>,
    {
        if self.index.contains_key(id) {
            return false;
        }
        let mut row: Vec<LangSurfaces> = Vec::new();
        for (lang, label, aliases) in entries {
            let Some(label) = label.as_deref().and_then(normalize_surface) else {
                continue;
            };
            let mut surfaces = vec![label];
            for alias in aliases.iter().filter_map(|a| normalize_surface(a)) {
                if surfaces.len() >= cap {
                    break;
                }
                if !surfaces.contains(&alias) {
                    surfaces.push(alias);
                }
            }
            match row.binary_search_by(|e| e.lang.cmp(&lang)) {
                Ok(pos) => row[pos].surfaces = surfaces,
                Err(pos) => row.insert(pos, LangSurfaces { lang, surfaces }),
            }
        }
        self.index.insert(id.to_string(), self.ids.len() as u32);
        self.ids.push(id.to_string());
        self.rows.push(row);
        true
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn row_surfaces(&self, row: u32, lang: Lang) -> Option<&[String]> {
        let row = &self.rows[row as usize];
        row.binary_search_by(|e| e.lang.cmp(&lang))
            .ok()
            .map(|pos| row[pos].surfaces.as_slice())
    }

    pub fn row_languages(&self, row: u32) -> impl Iterator<Item = Lang> + '_ {
        self.rows[row as usize].iter().map(|e| e.lang)
    }

    pub fn surfaces(&self, id: &str, lang: Lang) -> Option<&[String]> {
        self.row(id).and_then(|r| self.row_surfaces(r, lang))
    }

    /// Surface at `index` for `(id, lang)`, or `None`. No fallback language
    /// or index is ever substituted.
    pub fn label(&self, id: &str, lang: Lang, index: usize) -> Option<&str> {
        self.surfaces(id, lang)
            .and_then(|s| s.get(index))
            .map(String::as_str)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Lang {
        s.parse().unwrap()
    }

    fn q1420() -> Lexicon {
        let mut lex = Lexicon::new();
        lex.insert(
            "Q1420",
            [
                (l("en"), Some("motor car".into()), vec!["auto".into(), "autocar".into()]),
                (l("es"), Some("automóvil".into()), vec!["coche".into(), "carro".into()]),
            ],
            16,
        );
        lex
    }

    #[test]
    fn label_lookup() {
        let lex = q1420();
        assert_eq!(lex.label("Q1420", l("en"), 0), Some("motor car"));
        assert_eq!(lex.label("Q1420", l("es"), 1), Some("coche"));
        assert_eq!(lex.label("Q1420", l("es"), 3), None);
        assert_eq!(lex.label("Q1420", l("fr"), 0), None);
        assert_eq!(lex.label("Q9", l("en"), 0), None);
    }

    #[test]
    fn normalizes_dedups_and_caps() {
        let mut lex = Lexicon::new();
        lex.insert(
            "Q1",
            [(
                l("en"),
                Some("  motor \t car ".into()),
                vec!["auto".into(), " ".into(), "auto".into(), "motor car".into(), "car".into(), "wagon".into()],
            )],
            3,
        );
        assert_eq!(lex.surfaces("Q1", l("en")).unwrap(), ["motor car", "auto", "car"]);
    }

    #[test]
    fn alias_without_label_is_dropped() {
        let mut lex = Lexicon::new();
        lex.insert("Q1", [(l("fr"), None, vec!["voiture".into()])], 16);
        assert!(lex.contains("Q1"));
        assert_eq!(lex.surfaces("Q1", l("fr")), None);
    }

    #[test]
    fn duplicate_id_rejected() {
        let mut lex = q1420();
        assert!(!lex.insert("Q1420", [], 16));
        assert_eq!(lex.len(), 1);
    }
}
