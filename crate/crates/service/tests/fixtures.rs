mod common;

use common::*;
use pmax_core::event_log::write_csv;
use pmax_core::synthetic::loan_log;

/// The bundled loan log is exactly what the generator produces. Set
/// `PMAX_REGEN_FIXTURES=1` to rewrite it.
#[test]
fn loan_fixture_matches_generator() {
    let expected = write_csv(&loan_log(LOAN_SEED, LOAN_CASES, ""));
    let path = fixture("loan_50.csv");
    if std::env::var_os("PMAX_REGEN_FIXTURES").is_some() {
        std::fs::write(&path, &expected).unwrap();
    }
    assert_eq!(std::fs::read_to_string(&path).unwrap(), expected);
}

#[test]
fn transcripts_are_string_arrays() {
    assert_eq!(transcript("q1_transcript.json").len(), 2);
    assert_eq!(transcript("exhaust_transcript.json").len(), 3);
}
