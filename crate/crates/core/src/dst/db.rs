use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DstError;

/// One product, trip or dish of a scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CatalogEntry {
    pub scenario: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct CatalogFile {
    scenario: String,
    slots: Vec<String>,
    entries: Vec<BTreeMap<String, String>>,
}

/// A scenario's slot schema and its entries, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct Catalog {
    pub scenario: String,
    pub slots: Vec<String>,
    pub entries: Vec<CatalogEntry>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, DstError> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| DstError::Config(format!("catalog: {e}")))?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, attrs) in file.entries.into_iter().enumerate() {
            if let Some(bad) = attrs.keys().find(|k| !file.slots.contains(k)) {
                return Err(DstError::Config(format!(
                    "{} catalog entry {i}: slot {bad:?} is not in the schema",
                    file.scenario
                )));
            }
            let attributes = attrs.into_iter().map(|(k, v)| (k, v.to_lowercase())).collect();
            entries.push(CatalogEntry { scenario: file.scenario.clone(), attributes });
        }
        Ok(Catalog { scenario: file.scenario, slots: file.slots, entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DstError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DstError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Distinct values of `slot`, in first-seen order.
    pub fn values(&self, slot: &str) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if let Some(v) = e.attributes.get(slot) {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }
}

/// Entries that match every inform constraint not also denied, and carry no denied value.
pub fn db_search<'c>(
    db: &'c Catalog,
    inform: &BTreeMap<String, String>,
    deny: &BTreeMap<String, String>,
) -> Vec<&'c CatalogEntry> {
    db.entries
        .iter()
        .filter(|e| {
            let wanted = inform.iter().all(|(slot, value)| {
                deny.get(slot) == Some(value) || e.attributes.get(slot) == Some(value)
            });
            let denied = deny.iter().any(|(slot, value)| e.attributes.get(slot) == Some(value));
            wanted && !denied
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Catalog {
        Catalog::from_json(
            r#"{"scenario":"shopping","slots":["item","color"],"entries":[
                {"item":"shirt","color":"Red"},
                {"item":"shirt","color":"blue"},
                {"item":"hat","color":"green"}]}"#,
        )
        .unwrap()
    }

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    /// Straightforward scan written independently of `db_search`.
    fn oracle(db: &Catalog, inform: &BTreeMap<String, String>, deny: &BTreeMap<String, String>) -> Vec<usize> {
        let mut out = Vec::new();
        'entries: for (i, e) in db.entries.iter().enumerate() {
            for (s, v) in deny {
                if e.attributes.get(s) == Some(v) {
                    continue 'entries;
                }
            }
            for (s, v) in inform {
                if deny.get(s) == Some(v) {
                    continue;
                }
                if e.attributes.get(s) != Some(v) {
                    continue 'entries;
                }
            }
            out.push(i);
        }
        out
    }

    #[test]
    fn search_examples() {
        let db = toy();
        assert_eq!(db_search(&db, &map(&[]), &map(&[])).len(), 3);
        let hits = db_search(&db, &map(&[("color", "red")]), &map(&[]));
        assert_eq!(hits, vec![&db.entries[0]]);
        let hits = db_search(&db, &map(&[]), &map(&[("color", "red")]));
        assert_eq!(hits, vec![&db.entries[1], &db.entries[2]]);
        let hits = db_search(&db, &map(&[("item", "shirt"), ("color", "red")]), &map(&[("color", "red")]));
        assert_eq!(hits, vec![&db.entries[1]]);
    }

    #[test]
    fn search_agrees_with_scan() {
        let db = toy();
        let values = [("item", "shirt"), ("item", "hat"), ("color", "red"), ("color", "blue"), ("color", "green")];
        for mask_i in 0u32..32 {
            for mask_d in 0u32..32 {
                let pick = |m: u32| {
                    let mut out = BTreeMap::new();
                    for (b, (s, v)) in values.iter().enumerate() {
                        if m & (1 << b) != 0 {
                            out.insert(s.to_string(), v.to_string());
                        }
                    }
                    out
                };
                let (i, d) = (pick(mask_i), pick(mask_d));
                let got: Vec<usize> = db_search(&db, &i, &d)
                    .iter()
                    .map(|e| db.entries.iter().position(|x| std::ptr::eq(x, *e)).unwrap())
                    .collect();
                assert_eq!(got, oracle(&db, &i, &d));
            }
        }
    }

    #[test]
    fn rejects_unknown_slots_and_lists_values() {
        assert!(Catalog::from_json(r#"{"scenario":"s","slots":["a"],"entries":[{"b":"x"}]}"#).is_err());
        assert!(Catalog::from_json("not json").is_err());
        assert_eq!(toy().values("color"), vec!["red", "blue", "green"]);
        assert_eq!(toy().values("item"), vec!["shirt", "hat"]);
    }
}
