mod common;

use flowdsl::dsl::{compile, parse, serialize, ParseErrorKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn serialize_then_parse_is_identity(seed in any::<u64>()) {
        let catalog = common::synthetic_catalog();
        let program = common::random_program(&mut ChaCha8Rng::seed_from_u64(seed), &catalog);
        let text = serialize(&program);
        let reparsed = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&reparsed, &program);
        prop_assert_eq!(serialize(&reparsed), text);
        prop_assert!(compile(&reparsed, &catalog).is_ok());
    }

    #[test]
    fn arbitrary_text_never_panics(text in ".{0,200}") {
        let _ = parse(&text);
    }

    #[test]
    fn error_offsets_stay_in_bounds(seed in any::<u64>()) {
        let catalog = common::synthetic_catalog();
        let input = common::fuzz_input(&mut ChaCha8Rng::seed_from_u64(seed), &catalog);
        if let Err(e) = parse(&input) {
            prop_assert!(e.offset <= input.len());
        }
    }
}

#[test]
fn weather_flow_is_canonical_after_one_pass() {
    let program = parse(common::WEATHER_FLOW).unwrap();
    let canonical = serialize(&program);
    assert_eq!(canonical, common::WEATHER_FLOW.replace("; ", ";\n"));
    assert_eq!(serialize(&parse(&canonical).unwrap()), canonical);
}

#[test]
fn whitespace_variants_parse_identically() {
    let spaced = common::WEATHER_FLOW
        .replace(" = ", "\n=\t")
        .replace("; ", ";\r\n\n")
        .replace("({", "(  {");
    assert_eq!(parse(&spaced).unwrap(), parse(common::WEATHER_FLOW).unwrap());
    let compact = "t=await commonTrigger.Manual({});a=x.Y({\"k\":[1,2,{\"z\":null}]});";
    assert!(parse(compact).is_ok());
}

#[test]
fn error_kinds() {
    assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Structural);
    assert_eq!(parse("t = a.B({}) ").unwrap_err().kind, ParseErrorKind::Syntactic);
    assert_eq!(
        parse("t = a.B({ \"x\": 1 @ });").unwrap_err().kind,
        ParseErrorKind::Lexical
    );
    assert_eq!(
        parse("t = await commonTrigger.Manual({}); t = a.B({});")
            .unwrap_err()
            .kind,
        ParseErrorKind::Structural
    );
}
