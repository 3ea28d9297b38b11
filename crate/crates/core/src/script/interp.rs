//! Statement-by-statement execution against a session environment.
//!
//! A script can touch only the environment's current log, its current
//! model and its artifact store. Every change to those is journaled. When
//! statement `i` fails, the effects of statements before `i` remain.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{ArgValue, Ast, Call, Expr, Literal, Statement};
use super::registry::{registry, RegistryFunction, SemType};
use crate::artifacts::{ArtifactError, ArtifactStore, ChartSpec, Mark, Payload};
use crate::event_log::predicate::parse_predicate;
use crate::event_log::{filter_attribute, filter_query, filter_time_range, parse_timestamp, EventLog, LogError};
use crate::mining::{
    align, case_summary, compute_dfg, dfg_summary, discover_inductive, model_summary, token_replay, tree_to_petri,
    variant_summary, AlignOptions, MiningError, PetriNet, DEFAULT_STATE_BUDGET, DEFAULT_TOP_VARIANTS,
};
use crate::par::Parallelism;
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum EffectRecord {
    LogReplaced {
        statement: usize,
        events_before: usize,
        events_after: usize,
    },
    ModelSet {
        statement: usize,
        places: usize,
        transitions: usize,
    },
    ArtifactSaved {
        statement: usize,
        id: String,
    },
}

/// Everything a script may read or change.
#[derive(Debug)]
pub struct Environment {
    pub log: EventLog,
    pub net: Option<PetriNet>,
    pub store: ArtifactStore,
    pub turn: u32,
    pub parallelism: Parallelism,
    pub align_budget: usize,
    journal: Vec<EffectRecord>,
}

impl Environment {
    pub fn new(log: EventLog, store: ArtifactStore, turn: u32) -> Self {
        Environment {
            log,
            net: None,
            store,
            turn,
            parallelism: Parallelism::default(),
            align_budget: DEFAULT_STATE_BUDGET,
            journal: Vec::new(),
        }
    }

    /// Independent copy whose artifact saves stay private until adopted.
    pub fn fork(&self) -> Environment {
        Environment {
            log: self.log.clone(),
            net: self.net.clone(),
            store: self.store.fork(),
            turn: self.turn,
            parallelism: self.parallelism,
            align_budget: self.align_budget,
            journal: Vec::new(),
        }
    }

    pub fn journal(&self) -> &[EffectRecord] {
        &self.journal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaultClass {
    UnknownFunction,
    ArityMismatch,
    UnboundIdentifier,
    TypeMismatch,
    UnknownColumn,
    InvalidRange,
    InvalidArgument,
    NoModel,
    EmptyLog,
    NotWorkflowNet,
    DuplicateLabel,
    StateBudgetExceeded,
    InvalidPayload,
}

/// Structured traceback. Messages name columns and functions, never cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuntimeFault {
    pub statement: usize,
    pub line: usize,
    pub class: FaultClass,
    pub message: String,
    /// The failing statement, re-rendered.
    pub source: String,
}

impl fmt::Display for RuntimeFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "RuntimeError at line {} (statement {}): {:?}: {}\n    {}",
            self.line, self.statement, self.class, self.message, self.source
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecutionStatus {
    Success,
    RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementTrace {
    pub statement: usize,
    pub line: usize,
    pub effect: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub artifacts_created: Vec<String>,
    pub trace: Vec<StatementTrace>,
    pub error: Option<RuntimeFault>,
}

impl ExecutionOutcome {
    pub fn is_success(&self) -> bool {
        self.status == ExecutionStatus::Success
    }
}

#[derive(Debug, Clone)]
enum RtValue {
    Unit,
    Str(String),
    Number(f64),
    Table(Table),
    Chart(ChartSpec),
    Artifact(String),
}

impl RtValue {
    fn ty(&self) -> SemType {
        match self {
            RtValue::Unit => SemType::Unit,
            RtValue::Str(_) => SemType::Str,
            RtValue::Number(_) => SemType::Number,
            RtValue::Table(_) => SemType::Table,
            RtValue::Chart(_) => SemType::Chart,
            RtValue::Artifact(_) => SemType::ArtifactRef,
        }
    }

    fn describe(&self) -> String {
        match self {
            RtValue::Unit => "no value".into(),
            RtValue::Str(_) => "string".into(),
            RtValue::Number(_) => "number".into(),
            RtValue::Table(t) => format!("table {}x{}", t.len(), t.columns.len()),
            RtValue::Chart(c) => format!("{} chart over {} rows", c.mark.as_str(), c.data.len()),
            RtValue::Artifact(id) => format!("artifact {id}"),
        }
    }
}

type Fault = (FaultClass, String);

fn log_fault(e: LogError) -> Fault {
    let class = match e {
        LogError::UnknownColumn(_) => FaultClass::UnknownColumn,
        LogError::InvalidRange { .. } => FaultClass::InvalidRange,
        LogError::TypeMismatch(_) => FaultClass::TypeMismatch,
        _ => FaultClass::InvalidArgument,
    };
    (class, e.to_string())
}

fn mining_fault(e: MiningError) -> Fault {
    let class = match e {
        MiningError::EmptyLog => FaultClass::EmptyLog,
        MiningError::NotWorkflowNet(_) => FaultClass::NotWorkflowNet,
        MiningError::DuplicateLabel(_) => FaultClass::DuplicateLabel,
        MiningError::StateBudgetExceeded { .. } => FaultClass::StateBudgetExceeded,
    };
    (class, e.to_string())
}

fn artifact_fault(e: ArtifactError) -> Fault {
    (FaultClass::InvalidPayload, e.to_string())
}

struct Args<'v> {
    func: RegistryFunction,
    slots: Vec<Option<&'v RtValue>>,
}

impl Args<'_> {
    fn slot(&self, name: &str) -> Option<&RtValue> {
        let i = self.func.params.iter().position(|p| p.name == name).expect("registry param");
        self.slots[i]
    }

    fn str(&self, name: &str) -> Option<&str> {
        match self.slot(name) {
            Some(RtValue::Str(s)) => Some(s),
            _ => None,
        }
    }

    fn table(&self, name: &str) -> Option<&Table> {
        match self.slot(name) {
            Some(RtValue::Table(t)) => Some(t),
            _ => None,
        }
    }
}

struct Interpreter<'e> {
    env: &'e mut Environment,
    vars: HashMap<String, RtValue>,
    created: Vec<String>,
    statement: usize,
}

impl Interpreter<'_> {
    fn resolve<'v>(&'v self, func: RegistryFunction, call: &Call, literals: &'v [RtValue]) -> Result<Args<'v>, Fault> {
        let q = func.qualified();
        let mut slots: Vec<Option<&RtValue>> = vec![None; func.params.len()];
        let mut lit = literals.iter();
        for (i, arg) in call.args.iter().enumerate() {
            let value = match &arg.value {
                ArgValue::Ident(n) => self
                    .vars
                    .get(n)
                    .ok_or((FaultClass::UnboundIdentifier, format!("`{n}` is not bound")))?,
                ArgValue::Literal(_) => lit.next().expect("one value per literal"),
            };
            let slot = match &arg.name {
                None => i,
                Some(n) => func
                    .params
                    .iter()
                    .position(|p| p.name == n)
                    .ok_or((FaultClass::ArityMismatch, format!("{q} has no parameter `{n}`")))?,
            };
            if slot >= slots.len() || slots[slot].is_some() {
                return Err((FaultClass::ArityMismatch, format!("{q}: too many or repeated arguments")));
            }
            let want = func.params[slot].ty;
            if !value.ty().fits(want) {
                return Err((
                    FaultClass::TypeMismatch,
                    format!("{q}: `{}` expects {}, got {}", func.params[slot].name, want.as_str(), value.ty().as_str()),
                ));
            }
            slots[slot] = Some(value);
        }
        if let Some(p) = func.params.iter().zip(&slots).find(|(p, s)| !p.optional && s.is_none()) {
            return Err((FaultClass::ArityMismatch, format!("{q}: missing argument `{}`", p.0.name)));
        }
        Ok(Args { func, slots })
    }

    fn net(&self) -> Result<&PetriNet, Fault> {
        self.env
            .net
            .as_ref()
            .ok_or((FaultClass::NoModel, "no model in state; call api.discover_process_model() first".into()))
    }

    fn replace_log(&mut self, log: EventLog) -> String {
        let before = self.env.log.event_count();
        let after = log.event_count();
        self.env.log = log;
        self.env.journal.push(EffectRecord::LogReplaced {
            statement: self.statement,
            events_before: before,
            events_after: after,
        });
        format!("log filtered: {before} -> {after} events")
    }

    fn save(&mut self, payload: Payload, desc: &str) -> Result<RtValue, Fault> {
        let id = self.env.store.save(payload, desc, self.env.turn).map_err(artifact_fault)?;
        self.env.journal.push(EffectRecord::ArtifactSaved {
            statement: self.statement,
            id: id.clone(),
        });
        self.created.push(id.clone());
        Ok(RtValue::Artifact(id))
    }

    fn call(&mut self, call: &Call) -> Result<(RtValue, Option<String>), Fault> {
        let func = registry()
            .into_iter()
            .find(|f| f.namespace == call.namespace && f.name == call.name)
            .ok_or((FaultClass::UnknownFunction, format!("`{}` is not a registry function", call.qualified())))?;
        let literals: Vec<RtValue> = call
            .args
            .iter()
            .filter_map(|a| match &a.value {
                ArgValue::Literal(Literal::Str(s)) => Some(RtValue::Str(s.clone())),
                ArgValue::Literal(Literal::Number(n)) => Some(RtValue::Number(*n)),
                ArgValue::Ident(_) => None,
            })
            .collect();
        let args = self.resolve(func, call, &literals)?;
        let timestamp = |name: &str| -> Result<_, Fault> {
            let s = args.str(name).unwrap_or_default();
            parse_timestamp(s).ok_or((FaultClass::TypeMismatch, format!("`{name}` is not an ISO-8601 timestamp")))
        };
        let env = &*self.env;
        let value = match (call.namespace.as_str(), call.name.as_str()) {
            ("api", "filter_time_range") => {
                let log = filter_time_range(&env.log, timestamp("start")?, timestamp("end")?).map_err(log_fault)?;
                return Ok((RtValue::Unit, Some(self.replace_log(log))));
            }
            ("api", "filter_attribute") => {
                let log = filter_attribute(&env.log, args.str("column").unwrap(), args.str("value").unwrap())
                    .map_err(log_fault)?;
                return Ok((RtValue::Unit, Some(self.replace_log(log))));
            }
            ("api", "filter_pandas_query") => {
                let pred = parse_predicate(args.str("query").unwrap())
                    .map_err(|e| (FaultClass::InvalidArgument, e.to_string()))?;
                let log = filter_query(&env.log, &pred).map_err(log_fault)?;
                return Ok((RtValue::Unit, Some(self.replace_log(log))));
            }
            ("api", "get_dfg_summary") => RtValue::Table(dfg_summary(&compute_dfg(&env.log))),
            ("api", "get_model_summary") => RtValue::Table(model_summary(self.net()?).to_table()),
            ("api", "get_variant_summary") => {
                let n = match args.slot("top_n") {
                    Some(RtValue::Number(n)) if n.fract() == 0.0 && *n >= 1.0 => *n as usize,
                    Some(_) => return Err((FaultClass::TypeMismatch, "`top_n` must be a whole number >= 1".into())),
                    None => DEFAULT_TOP_VARIANTS,
                };
                RtValue::Table(variant_summary(&env.log, n))
            }
            ("api", "get_case_summary") => RtValue::Table(case_summary(&env.log)),
            ("api", "discover_process_model") => {
                let net = tree_to_petri(&discover_inductive(&env.log).map_err(mining_fault)?);
                let (places, transitions) = (net.places.len(), net.transitions.len());
                self.env.net = Some(net);
                self.env.journal.push(EffectRecord::ModelSet {
                    statement: self.statement,
                    places,
                    transitions,
                });
                return Ok((RtValue::Unit, Some(format!("model discovered: {places} places, {transitions} transitions"))));
            }
            ("api", "cc_alignments") => {
                let opts = AlignOptions {
                    parallelism: env.parallelism,
                    state_budget: env.align_budget,
                    ..Default::default()
                };
                RtValue::Table(align(&env.log, self.net()?, &opts).map_err(mining_fault)?.to_table())
            }
            ("api", "cc_token_based_replay") => {
                RtValue::Table(token_replay(&env.log, self.net()?, env.parallelism).map_err(mining_fault)?.to_table())
            }
            ("api", "save_pnet") => {
                let net = self.net()?.clone();
                let desc = args.str("desc").unwrap_or("Discovered Petri net").to_string();
                let v = self.save(Payload::PetriNet(net), &desc)?;
                return Ok((v, None));
            }
            ("api", "save_visualization") => {
                let Some(RtValue::Chart(c)) = args.slot("chart") else { unreachable!("type checked") };
                let (c, desc) = (c.clone(), args.str("desc").unwrap().to_string());
                let v = self.save(Payload::Chart(c), &desc)?;
                return Ok((v, None));
            }
            ("api", "save_dataframe") => {
                let (t, desc) = (args.table("df").unwrap().clone(), args.str("desc").unwrap().to_string());
                let v = self.save(Payload::Table(t), &desc)?;
                return Ok((v, None));
            }
            ("chart", kind) => {
                let mark = Mark::ALL.into_iter().find(|m| m.as_str() == kind).expect("registry chart kind");
                let spec = ChartSpec {
                    mark,
                    data: args.table("table").unwrap().clone(),
                    x: args.str("x").unwrap().to_string(),
                    y: args.str("y").map(str::to_string),
                    title: args.str("title").map(str::to_string),
                };
                spec.validate().map_err(artifact_fault)?;
                RtValue::Chart(spec)
            }
            _ => unreachable!("registry and interpreter disagree on {}", call.qualified()),
        };
        Ok((value, None))
    }

    fn run(&mut self, st: &Statement) -> Result<String, Fault> {
        let (value, effect) = match &st.expr {
            Expr::Call(c) => self.call(c)?,
            Expr::Literal { value } => (
                match value {
                    Literal::Str(s) => RtValue::Str(s.clone()),
                    Literal::Number(n) => RtValue::Number(*n),
                },
                None,
            ),
        };
        let effect = effect.unwrap_or_else(|| value.describe());
        if let Some(name) = &st.binding {
            self.vars.insert(name.clone(), value);
        }
        Ok(effect)
    }
}

pub fn execute(ast: &Ast, env: &mut Environment) -> ExecutionOutcome {
    let mut it = Interpreter {
        env,
        vars: HashMap::new(),
        created: Vec::new(),
        statement: 0,
    };
    let mut trace = Vec::new();
    for (i, st) in ast.statements.iter().enumerate() {
        it.statement = i;
        match it.run(st) {
            Ok(effect) => trace.push(StatementTrace {
                statement: i,
                line: st.line,
                effect,
            }),
            Err((class, message)) => {
                return ExecutionOutcome {
                    status: ExecutionStatus::RuntimeError,
                    artifacts_created: it.created,
                    trace,
                    error: Some(RuntimeFault {
                        statement: i,
                        line: st.line,
                        class,
                        message,
                        source: st.to_string(),
                    }),
                }
            }
        }
    }
    ExecutionOutcome {
        status: ExecutionStatus::Success,
        artifacts_created: it.created,
        trace,
        error: None,
    }
}
