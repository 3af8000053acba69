//! Seeded generators shared by the integration suites.

#![allow(dead_code)]

use flowdsl::catalog::{Catalog, OperationSignature};
use flowdsl::dsl::{
    ActionCall, Assignment, Conditional, DslProgram, JsonNumber, ParamObject, ParamValue, Reference,
    Statement,
};
use flowdsl::prompting::{render_f2nl_metaprompt, render_paraphrase_metaprompt, render_steps_metaprompt};
use rand::seq::SliceRandom;
use rand::Rng;

pub const WEATHER_FLOW: &str = r#"triggerOutputs = await commonTrigger.Recurrence({ "frequency": "Day", "interval": 1, "timeZone": "Eastern Standard Time" }); outputs_shared_msnweather_TodaysForecast = shared_msnweather.TodaysForecast({ "units": "Imperial", "location": "Seattle" }); outputs_shared_flowpush_SendEmailNotification = shared_flowpush.SendEmailNotification({});"#;

const CONNECTORS: [&str; 8] = [
    "shared_office365",
    "shared_sharepointonline",
    "shared_planner",
    "shared_teams",
    "shared_excelonlinebusiness",
    "shared_onedriveforbusiness",
    "shared_flowpush",
    "shared_sAPIsign",
];

/// 50 operations: 5 triggers and 45 actions.
pub fn synthetic_catalog() -> Catalog {
    prefixed_catalog("")
}

/// The synthetic catalog with every connector name prefixed, so its
/// identifiers share nothing with the unprefixed one when `prefix` is non-empty.
pub fn prefixed_catalog(prefix: &str) -> Catalog {
    let c = |name: &str| format!("{prefix}{name}");
    let mut signatures = vec![
        OperationSignature::trigger(c("commonTrigger"), "Recurrence"),
        OperationSignature::trigger(c("commonTrigger"), "Manual"),
        OperationSignature::trigger(c("shared_office365"), "OnNewEmailV3"),
        OperationSignature::trigger(c("shared_sharepointonline"), "GetOnNewItems"),
        OperationSignature::trigger(c("shared_sAPIsign"), "CreateWebhookForAgreementSignedEvent"),
    ];
    for i in 0..45 {
        signatures.push(OperationSignature::action(
            c(CONNECTORS[i % CONNECTORS.len()]),
            format!("Operation{i}_V2"),
        ));
    }
    Catalog::from_signatures(signatures, format!("{prefix}synthetic-50")).unwrap()
}

const KEYS: [&str; 10] = [
    "to", "subject", "body", "item", "id", "dataset", "table", "if", "null", "value",
];
const STRINGS: [&str; 8] = [
    "",
    "Seattle",
    "quote \" and backslash \\",
    "tab\tnew\nline",
    "unicode é ✓ 😀",
    "control \u{1}",
    "slash / and braces {}",
    "https://contoso.sharepoint.com/sites/ops",
];
const NUMBERS: [&str; 8] = ["0", "-1", "42", "3.25", "-0.5e+3", "1E10", "2.0", "-0"];

fn reference<R: Rng>(rng: &mut R, targets: &[String]) -> Reference {
    let root = targets
        .choose(rng)
        .cloned()
        .unwrap_or_else(|| "triggerOutputs".to_owned());
    let mut segments = vec![root];
    for _ in 0..rng.gen_range(0..3) {
        segments.push(
            ["body", "value", "id", "null", "if", "items"]
                .choose(rng)
                .unwrap()
                .to_string(),
        );
    }
    Reference::new(segments).unwrap()
}

fn value<R: Rng>(rng: &mut R, targets: &[String], depth: usize) -> ParamValue {
    let choice = if depth >= 3 {
        rng.gen_range(0..5)
    } else {
        rng.gen_range(0..7)
    };
    match choice {
        0 => ParamValue::Null,
        1 => ParamValue::Bool(rng.gen()),
        2 => ParamValue::Number(JsonNumber::parse(NUMBERS.choose(rng).unwrap()).unwrap()),
        3 => ParamValue::String(STRINGS.choose(rng).unwrap().to_string()),
        4 => ParamValue::Reference(reference(rng, targets)),
        5 => ParamValue::Array(
            (0..rng.gen_range(0..4))
                .map(|_| value(rng, targets, depth + 1))
                .collect(),
        ),
        _ => ParamValue::Object(object(rng, targets, depth + 1)),
    }
}

fn object<R: Rng>(rng: &mut R, targets: &[String], depth: usize) -> ParamObject {
    let mut params = ParamObject::new();
    let mut keys = KEYS.to_vec();
    keys.shuffle(rng);
    for key in keys.into_iter().take(rng.gen_range(0..4)) {
        params.insert(key, value(rng, targets, depth)).unwrap();
    }
    params
}

fn assignment<R: Rng>(rng: &mut R, ops: &[&OperationSignature], targets: &mut Vec<String>) -> Statement {
    let op = *ops.choose(rng).unwrap();
    let awaited = rng.gen();
    let target = format!("outputs_{}_{}", op.action_id(), targets.len());
    let call =
        ActionCall::new(op.connector.clone(), op.operation.clone()).with_params(object(rng, targets, 0));
    targets.push(target.clone());
    Statement::Assign(Assignment {
        target,
        awaited,
        call,
    })
}

/// A program of `1..=8` top-level statements whose first statement calls
/// a trigger and whose later statements call actions, with optional
/// conditional blocks.
pub fn random_program<R: Rng>(rng: &mut R, catalog: &Catalog) -> DslProgram {
    let triggers: Vec<_> = catalog.triggers().collect();
    let actions: Vec<_> = catalog.actions().collect();
    let mut targets = Vec::new();
    let mut statements = vec![assignment(rng, &triggers, &mut targets)];
    let count = rng.gen_range(1..=8);
    while statements.len() < count {
        if rng.gen_bool(0.2) {
            let condition = reference(rng, &targets);
            let then_branch = (0..rng.gen_range(1..=2))
                .map(|_| assignment(rng, &actions, &mut targets))
                .collect();
            let else_branch = rng.gen_bool(0.5).then(|| {
                (0..rng.gen_range(1..=2))
                    .map(|_| assignment(rng, &actions, &mut targets))
                    .collect()
            });
            statements.push(Statement::If(Conditional {
                condition,
                then_branch,
                else_branch,
            }));
        } else {
            statements.push(assignment(rng, &actions, &mut targets));
        }
    }
    DslProgram::new(statements)
}

/// Random bytes, or a valid program with a few bytes overwritten.
pub fn fuzz_input<R: Rng>(rng: &mut R, catalog: &Catalog) -> String {
    if rng.gen_bool(0.5) {
        let len = rng.gen_range(0..256);
        let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    } else {
        let mut bytes = flowdsl::dsl::serialize(&random_program(rng, catalog)).into_bytes();
        for _ in 0..rng.gen_range(1..4) {
            let i = rng.gen_range(0..bytes.len());
            bytes[i] = *b"{}[]();.=\"\\ ax0#".choose(rng).unwrap();
        }
        String::from_utf8_lossy(&bytes).into_owned()
    }
}

pub const APPROVAL_FLOW: &str = r#"triggerOutputs = await shared_onedriveforbusiness.OnNewFile({ "folderId": "/Contracts" });
outputs_shared_sAPIsign_CreateTransientDocument = shared_sAPIsign.CreateTransientDocument({ "File-Name": triggerOutputs.headers.fileName, "File": triggerOutputs.body });
outputs_shared_sAPIsign_CreateAgreementById = shared_sAPIsign.CreateAgreementById({ "transientDocumentId": outputs_shared_sAPIsign_CreateTransientDocument.body.transientDocumentId });
outputs_shared_flowpush_SendNotification = shared_flowpush.SendNotification({ "NotificationText": "Agreement sent for approval" });"#;

/// Fixed inputs for the golden metaprompt renderings.
pub fn golden_inputs() -> Vec<(&'static str, String)> {
    let f2nl = render_f2nl_metaprompt(&[
        WEATHER_FLOW,
        "triggerOutputs = await commonTrigger.Manual({});\noutputs_shared_teams_PostMessageToConversation = shared_teams.PostMessageToConversation({ \"poster\": \"Flow bot\" });",
        "triggerOutputs = await shared_office365.OnNewEmailV3({});\noutputs_shared_planner_CreateTask_V3 = shared_planner.CreateTask_V3({ \"title\": triggerOutputs.body.subject });",
        "triggerOutputs = await shared_sAPIsign.CreateWebhookForAgreementSignedEvent({});\noutputs_shared_googledrive_CreateFile = shared_googledrive.CreateFile({ \"name\": \"agreement.pdf\" });",
        "triggerOutputs = await commonTrigger.Recurrence({ \"frequency\": \"Hour\", \"interval\": 4 });",
    ])
    .unwrap();
    let steps = render_steps_metaprompt(
        "Get agreement approval on a new file in OneDrive for Business.",
        APPROVAL_FLOW,
        &[
            "shared_onedriveforbusiness.OnNewFile",
            "shared_sAPIsign.CreateTransientDocument",
            "shared_sAPIsign.CreateAgreementById",
            "shared_flowpush.SendNotification",
        ],
    )
    .unwrap();
    let paraphrase = render_paraphrase_metaprompt(
        "Get notified when a participant views the agreement email",
        "The user wants to get notified when a participant views the agreement email. To achieve this, the flow will use the CreateWebhookGeneric function from sAPI Sign to set up the webhook, and the SendNotification function from Flow Push to send a mobile notification when the event occurs.",
    )
    .unwrap();
    vec![
        ("f2nl.txt", f2nl),
        ("steps.txt", steps),
        ("paraphrase.txt", paraphrase),
    ]
}
