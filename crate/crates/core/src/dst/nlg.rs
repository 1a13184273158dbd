use std::collections::BTreeMap;

use super::{CatalogEntry, DialogState, DstError};

/// Response templates keyed `scenario.name`. Keys may repeat; each occurrence adds a variant.
///
/// ```text
/// # comment
/// shopping.greeting = Hello! Welcome to the {scenario} store.
/// shopping.inform = The {color} {item} costs {price} dollars.
/// shopping.inform.empty = Sorry, nothing matches.
/// shopping.suggest.inform = I want a red shirt
/// ```
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Templates {
    entries: BTreeMap<String, Vec<String>>,
}

impl Templates {
    pub fn parse(text: &str) -> Result<Self, DstError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| DstError::Config(format!("templates line {}: expected key = text", i + 1)))?;
            let key = k.trim();
            if !key.contains('.') {
                return Err(DstError::Config(format!(
                    "templates line {}: key {key:?} needs a scenario prefix",
                    i + 1
                )));
            }
            entries.entry(key.to_string()).or_default().push(v.trim().to_string());
        }
        Ok(Templates { entries })
    }

    pub fn get(&self, scenario: &str, name: &str) -> Option<&str> {
        self.all(scenario, name).first().map(String::as_str)
    }

    pub fn all(&self, scenario: &str, name: &str) -> &[String] {
        self.entries.get(&format!("{scenario}.{name}")).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Scenarios that have a greeting.
    pub fn scenarios(&self) -> Vec<&str> {
        self.entries
            .keys()
            .filter_map(|k| k.strip_suffix(".greeting"))
            .filter(|s| !s.contains('.'))
            .collect()
    }
}

/// Values a template may refer to beyond the dialog state.
#[derive(Clone, Debug, Default)]
pub struct RenderContext<'a> {
    pub results: &'a [&'a CatalogEntry],
    /// First schema slot the user has not informed yet.
    pub missing: Option<&'a str>,
}

fn lookup(name: &str, state: &DialogState, ctx: &RenderContext) -> Option<String> {
    match name {
        "scenario" => return Some(state.scenario.clone()),
        "count" => return Some(ctx.results.len().to_string()),
        "turn" => return Some(state.turn.to_string()),
        "missing" => return ctx.missing.map(str::to_string),
        _ => {}
    }
    if let Some((map, slot)) = name.split_once('.') {
        let m = match map {
            "is" => &state.inform,
            "rs" => &state.request,
            "ds" => &state.deny,
            _ => return None,
        };
        return m.get(slot).cloned();
    }
    ctx.results
        .first()
        .and_then(|e| e.attributes.get(name))
        .or_else(|| state.inform.get(name))
        .or_else(|| state.deny.get(name))
        .cloned()
}

/// Fills `{name}` placeholders. Names resolve, in order, to `scenario`, `count`, `turn`,
/// `missing`, `is.x`/`rs.x`/`ds.x`, the first search result, informed values, denied values.
pub fn fill(template: &str, state: &DialogState, ctx: &RenderContext) -> Result<String, DstError> {
    let mut out = String::with_capacity(template.len() + 16);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| DstError::Template { placeholder: after.to_string() })?;
        let name = &after[..close];
        let value = lookup(name, state, ctx)
            .ok_or_else(|| DstError::Template { placeholder: name.to_string() })?;
        out.push_str(&value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders the response for `action`. Inform and recommend without results, and request
/// with nothing missing, use the `action.empty` template.
pub fn nlg_render(
    action: &str,
    state: &DialogState,
    ctx: &RenderContext,
    templates: &Templates,
) -> Result<String, DstError> {
    let empty = match action {
        "inform" | "recommend" => ctx.results.is_empty(),
        "request" => ctx.missing.is_none(),
        _ => false,
    };
    let name = if empty { format!("{action}.empty") } else { action.to_string() };
    let template = templates.get(&state.scenario, &name).ok_or_else(|| {
        DstError::Config(format!("no template {}.{name}", state.scenario))
    })?;
    fill(template, state, ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state() -> DialogState {
        DialogState::new("shopping")
    }

    #[test]
    fn substitution_examples() {
        let t = Templates::parse(
            "shopping.greeting = Hello! Welcome to the {scenario} store.\n\
             shopping.inform = It costs {price} dollars.\n\
             shopping.inform.empty = Nothing matches.\n\
             shopping.tips = Try asking about colors.\n",
        )
        .unwrap();
        let s = state();
        assert_eq!(
            nlg_render("greeting", &s, &RenderContext::default(), &t).unwrap(),
            "Hello! Welcome to the shopping store."
        );
        let entry = CatalogEntry {
            scenario: "shopping".into(),
            attributes: [("price".to_string(), "20".to_string())].into_iter().collect(),
        };
        let results = [&entry];
        let ctx = RenderContext { results: &results, missing: None };
        assert_eq!(nlg_render("inform", &s, &ctx, &t).unwrap(), "It costs 20 dollars.");
        assert_eq!(nlg_render("inform", &s, &RenderContext::default(), &t).unwrap(), "Nothing matches.");
        assert_eq!(
            nlg_render("tips", &s, &RenderContext::default(), &t).unwrap(),
            "Try asking about colors."
        );
    }

    #[test]
    fn errors_name_the_problem() {
        let t = Templates::parse("shopping.inform = It is {colour}.").unwrap();
        let entry = CatalogEntry { scenario: "shopping".into(), attributes: BTreeMap::new() };
        let results = [&entry];
        let ctx = RenderContext { results: &results, missing: None };
        match nlg_render("inform", &state(), &ctx, &t) {
            Err(DstError::Template { placeholder }) => assert_eq!(placeholder, "colour"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(nlg_render("recommend", &state(), &ctx, &t), Err(DstError::Config(_))));
        assert!(Templates::parse("greeting = hi").is_err());
        assert!(Templates::parse("shopping.greeting hi").is_err());
    }

    #[test]
    fn state_maps_and_repeated_keys() {
        let t = Templates::parse(
            "shopping.greeting = hi\nshopping.suggest.inform = a\nshopping.suggest.inform = b\ntravel.greeting = yo\n",
        )
        .unwrap();
        assert_eq!(t.all("shopping", "suggest.inform"), ["a", "b"]);
        assert_eq!(t.scenarios(), vec!["shopping", "travel"]);
        let mut s = state();
        s.inform.insert("color".into(), "red".into());
        s.request.insert("price".into(), "?".into());
        s.deny.insert("size".into(), "xl".into());
        let out = fill("{is.color}/{rs.price}/{ds.size}/{color}/{size}", &s, &RenderContext::default()).unwrap();
        assert_eq!(out, "red/?/xl/red/xl");
        assert!(fill("{rs.color}", &s, &RenderContext::default()).is_err());
        assert!(fill("open {brace", &s, &RenderContext::default()).is_err());
    }
}
