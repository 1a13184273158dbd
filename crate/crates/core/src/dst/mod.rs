//! Rule-based dialog management: state tracking, action choice, catalog search and
//! template responses for the practice scenarios.
//!
//! Each user turn is understood as a dialog act plus `(slot, value)` chunks and folded
//! into three slot maps: requested (RS), informed (IS) and denied (DS). The agent action
//! follows from the act alone:
//!
//! | user act        | agent action                  | state update        |
//! |-----------------|-------------------------------|---------------------|
//! | `byemsg`        | `break`, dialog ends          |                     |
//! | `greeting`      | `greeting`                    |                     |
//! | `inform`        | `inform` or `request` (coin)  | IS, latest wins     |
//! | `request`       | `inform`                      | RS                  |
//! | `ask_recommend` | `recommend`                   |                     |
//! | `deny`          | `request` or `recommend` (coin) | DS                |
//! | anything else   | `tips`                        |                     |
//!
//! The catalog is searched whenever the action is `inform` or `recommend`.

mod db;
mod nlg;
mod nlu;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

pub use db::{db_search, Catalog, CatalogEntry};
pub use nlg::{fill, nlg_render, RenderContext, Templates};
pub use nlu::{normalize, DialogAct, IntentMap, NluResult, RuleNlu};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DstError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("template placeholder {{{placeholder}}} cannot be resolved")]
    Template { placeholder: String },
    #[error("{0}")]
    Contract(String),
}

/// Agent actions.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Greeting,
    Inform,
    Request,
    Recommend,
    Tips,
    Break,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Greeting => "greeting",
            Action::Inform => "inform",
            Action::Request => "request",
            Action::Recommend => "recommend",
            Action::Tips => "tips",
            Action::Break => "break",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DialogState {
    pub turn: usize,
    pub scenario: String,
    #[serde(rename = "rs")]
    pub request: BTreeMap<String, String>,
    #[serde(rename = "is")]
    pub inform: BTreeMap<String, String>,
    #[serde(rename = "ds")]
    pub deny: BTreeMap<String, String>,
    pub active: bool,
    pub last_action: Option<Action>,
}

impl DialogState {
    pub fn new(scenario: &str) -> Self {
        DialogState {
            turn: 0,
            scenario: scenario.to_string(),
            request: BTreeMap::new(),
            inform: BTreeMap::new(),
            deny: BTreeMap::new(),
            active: true,
            last_action: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub action: Action,
    /// Search results when the action consulted the catalog.
    pub results: Vec<CatalogEntry>,
}

fn coin(rng: &mut impl Rng, a: Action, b: Action) -> Action {
    if rng.random_range(0..2) == 0 {
        a
    } else {
        b
    }
}

/// Advances `state` by one user turn and picks the agent action.
pub fn dst_step(
    state: &mut DialogState,
    nlu: &NluResult,
    rng: &mut impl Rng,
    db: &Catalog,
) -> Result<Step, DstError> {
    if !state.active {
        return Err(DstError::Contract("the dialog has ended".into()));
    }
    if db.scenario != state.scenario {
        return Err(DstError::Config(format!(
            "catalog is for {:?} but the dialog is {:?}",
            db.scenario, state.scenario
        )));
    }
    state.turn += 1;
    let chunks = nlu.chunks.iter().cloned();
    let action = match nlu.intent {
        DialogAct::Byemsg => {
            state.active = false;
            Action::Break
        }
        DialogAct::Greeting => Action::Greeting,
        DialogAct::Inform => {
            state.inform.extend(chunks);
            coin(rng, Action::Inform, Action::Request)
        }
        DialogAct::Request => {
            state.request.extend(chunks);
            Action::Inform
        }
        DialogAct::AskRecommend => Action::Recommend,
        DialogAct::Deny => {
            state.deny.extend(chunks);
            coin(rng, Action::Request, Action::Recommend)
        }
        DialogAct::Other => Action::Tips,
    };
    let results = match action {
        Action::Inform | Action::Recommend => {
            db_search(db, &state.inform, &state.deny).into_iter().cloned().collect()
        }
        _ => Vec::new(),
    };
    state.last_action = Some(action);
    Ok(Step { action, results })
}

/// First schema slot without an informed value.
pub fn missing_slot<'c>(state: &DialogState, db: &'c Catalog) -> Option<&'c str> {
    db.slots.iter().find(|s| !state.inform.contains_key(*s)).map(String::as_str)
}

/// Everything a dialog needs from the data directory.
///
/// ```text
/// templates.txt          response templates and suggested utterances
/// rules.txt              keyword understanding rules
/// intent_map.txt         tagger intent -> dialog act
/// catalog/<name>.json    one catalog per scenario
/// ```
#[derive(Clone, Debug)]
pub struct Resources {
    pub templates: Templates,
    pub catalogs: BTreeMap<String, Catalog>,
    pub rules: RuleNlu,
    pub intent_map: IntentMap,
}

fn read(path: &Path) -> Result<String, DstError> {
    std::fs::read_to_string(path).map_err(|e| DstError::Config(format!("{}: {e}", path.display())))
}

impl Resources {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, DstError> {
        let dir = dir.as_ref();
        let templates = Templates::parse(&read(&dir.join("templates.txt"))?)?;
        let rules = RuleNlu::parse(&read(&dir.join("rules.txt"))?)?;
        let intent_map = IntentMap::parse(&read(&dir.join("intent_map.txt"))?)?;
        let cat_dir = dir.join("catalog");
        let listing = std::fs::read_dir(&cat_dir)
            .map_err(|e| DstError::Config(format!("{}: {e}", cat_dir.display())))?;
        let mut paths: Vec<_> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut catalogs = BTreeMap::new();
        for p in paths {
            let c = Catalog::load(&p)?;
            if templates.get(&c.scenario, "greeting").is_none() {
                return Err(DstError::Config(format!("scenario {:?} has no greeting template", c.scenario)));
            }
            catalogs.insert(c.scenario.clone(), c);
        }
        if catalogs.is_empty() {
            return Err(DstError::Config(format!("no catalogs in {}", cat_dir.display())));
        }
        Ok(Resources { templates, catalogs, rules, intent_map })
    }

    pub fn catalog(&self, scenario: &str) -> Result<&Catalog, DstError> {
        self.catalogs.get(scenario).ok_or_else(|| DstError::UnknownScenario(scenario.to_string()))
    }

    pub fn scenarios(&self) -> impl Iterator<Item = &str> {
        self.catalogs.keys().map(String::as_str)
    }
}

/// Result of one user turn.
#[derive(Clone, Debug, PartialEq)]
pub struct Turn {
    pub nlu: NluResult,
    pub action: Action,
    pub response: String,
    pub results: Vec<CatalogEntry>,
}

/// One seeded conversation in one scenario, with its transcript.
#[derive(Clone, Debug)]
pub struct Dialog {
    state: DialogState,
    rng: ChaCha8Rng,
    transcript: Vec<String>,
}

impl Dialog {
    /// Starts a dialog; the transcript opens with the greeting.
    pub fn start(res: &Resources, scenario: &str, seed: u64) -> Result<(Self, String), DstError> {
        res.catalog(scenario)?;
        let state = DialogState::new(scenario);
        let greeting = nlg_render("greeting", &state, &RenderContext::default(), &res.templates)?;
        let mut d = Dialog { state, rng: ChaCha8Rng::seed_from_u64(seed), transcript: Vec::new() };
        d.transcript.push(agent_line(Action::Greeting, &greeting));
        Ok((d, greeting))
    }

    pub fn state(&self) -> &DialogState {
        &self.state
    }

    pub fn is_active(&self) -> bool {
        self.state.active
    }

    pub fn transcript(&self) -> &[String] {
        &self.transcript
    }

    /// Understands `text` with the keyword rules, then takes the turn.
    pub fn turn_text(&mut self, res: &Resources, text: &str) -> Result<Turn, DstError> {
        let nlu = res.rules.understand(text, res.catalog(&self.state.scenario)?);
        self.turn(res, text, nlu)
    }

    pub fn turn(&mut self, res: &Resources, text: &str, nlu: NluResult) -> Result<Turn, DstError> {
        let db = res.catalog(&self.state.scenario)?;
        let mut next = self.state.clone();
        let step = dst_step(&mut next, &nlu, &mut self.rng, db)?;
        let refs: Vec<&CatalogEntry> = step.results.iter().collect();
        let ctx = RenderContext { results: &refs, missing: missing_slot(&next, db) };
        let response = nlg_render(step.action.as_str(), &next, &ctx, &res.templates)?;
        self.state = next;
        self.transcript.push(format!("user: {text}"));
        self.transcript.push(agent_line(step.action, &response));
        Ok(Turn { nlu, action: step.action, response, results: step.results })
    }

    /// Suggested next utterances for the current state.
    pub fn tips(&self, res: &Resources) -> Vec<String> {
        let order: &[&str] = if self.state.inform.is_empty() {
            &["inform", "recommend", "bye"]
        } else {
            &["request", "recommend", "deny", "inform", "bye"]
        };
        order
            .iter()
            .flat_map(|k| res.templates.all(&self.state.scenario, &format!("suggest.{k}")))
            .cloned()
            .collect()
    }
}

pub fn agent_line(action: Action, response: &str) -> String {
    format!("agent [{action}]: {response}")
}
