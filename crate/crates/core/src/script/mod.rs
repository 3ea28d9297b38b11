//! A straight-line analysis language over a closed function registry.
//!
//! ```text
//! api.filter_pandas_query("amount > 500")
//! api.discover_process_model()
//! let fit = api.cc_token_based_replay()
//! api.save_dataframe(fit, "Fitness of large loans")
//! ```

mod ast;
mod interp;
mod parser;
mod registry;
mod verify;

use serde::{Deserialize, Serialize};

pub use ast::{Arg, ArgValue, Ast, Call, Expr, Literal, Statement};
pub use interp::{
    execute, EffectRecord, Environment, ExecutionOutcome, ExecutionStatus, FaultClass, RuntimeFault, StatementTrace,
};
pub use parser::{parse_script, ParseError};
pub use registry::{
    lookup, registry, registry_manifest, registry_table, Category, Effect, Param, RegistryFunction, SemType,
    OPERATIONAL_RULES,
};
pub use verify::{verify, Diagnostic, DiagnosticCode, VerifierReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    EngineerGenerated,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub source: String,
    pub origin: Origin,
}

/// Why a script did not get past static checking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Parse(ParseError),
    Verify(VerifierReport),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::Parse(e) => write!(f, "{e}"),
            Rejection::Verify(r) => {
                for (i, d) in r.diagnostics.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{d}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parse and verify against the full registry.
pub fn check(source: &str) -> Result<Ast, Rejection> {
    let ast = parse_script(source).map_err(Rejection::Parse)?;
    let report = verify(&ast, &registry());
    if report.ok {
        Ok(ast)
    } else {
        Err(Rejection::Verify(report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_exactly_the_registry() {
        let m = registry_manifest();
        assert!(m.contains("api.filter_time_range(start: str, end: str)"));
        assert!(m.contains("api.cc_alignments()"));
        let listed: Vec<&str> = m.lines().filter(|l| l.starts_with("- ")).collect();
        assert_eq!(listed.len(), 18);
        assert_eq!(registry().iter().filter(|f| f.namespace == "api").count(), 13);
        for f in registry() {
            assert_eq!(listed.iter().filter(|l| l.starts_with(&format!("- {}(", f.qualified()))).count(), 1);
        }
        assert_eq!(m, registry_manifest());
        assert_eq!(registry_table().len(), 18);
        for rule in OPERATIONAL_RULES {
            assert!(m.contains(rule));
        }
    }

    #[test]
    fn check_separates_parse_and_verify_failures() {
        assert!(matches!(check("api.("), Err(Rejection::Parse(_))));
        assert!(matches!(check("api.nope()"), Err(Rejection::Verify(_))));
        assert!(check("api.get_dfg_summary()").is_ok());
    }
}
