//! Registry of valid connector operations.
//!
//! The catalog decides which calls count as triggers and which identifiers
//! in a generated flow are grounded versus hallucinated. Lookups are exact
//! and case-sensitive on the `connector_operation` identifier.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsl::Flow;

/// Connector whose operations are always triggers.
pub const COMMON_TRIGGER_CONNECTOR: &str = "commonTrigger";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationSignature {
    pub connector: String,
    pub operation: String,
    #[serde(default)]
    pub is_trigger: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl OperationSignature {
    pub fn action(connector: impl Into<String>, operation: impl Into<String>) -> Self {
        Self {
            connector: connector.into(),
            operation: operation.into(),
            is_trigger: false,
            description: None,
        }
    }

    pub fn trigger(connector: impl Into<String>, operation: impl Into<String>) -> Self {
        Self {
            is_trigger: true,
            ..Self::action(connector, operation)
        }
    }

    pub fn action_id(&self) -> String {
        format!("{}_{}", self.connector, self.operation)
    }

    pub fn dotted_name(&self) -> String {
        format!("{}.{}", self.connector, self.operation)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate catalog entry {connector}.{operation}")]
    Duplicate { connector: String, operation: String },
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    signatures: Vec<OperationSignature>,
    by_id: HashMap<String, usize>,
    version: String,
}

impl Catalog {
    pub fn empty() -> Self {
        Self {
            version: "empty".into(),
            ..Self::default()
        }
    }

    pub fn from_signatures(
        signatures: Vec<OperationSignature>,
        version: impl Into<String>,
    ) -> Result<Self, CatalogError> {
        let mut by_id = HashMap::with_capacity(signatures.len());
        let mut pairs = HashSet::with_capacity(signatures.len());
        for (index, signature) in signatures.iter().enumerate() {
            if !pairs.insert((signature.connector.as_str(), signature.operation.as_str())) {
                return Err(CatalogError::Duplicate {
                    connector: signature.connector.clone(),
                    operation: signature.operation.clone(),
                });
            }
            // `a_b.c` and `a.b_c` share an identifier; the first entry wins lookups
            by_id.entry(signature.action_id()).or_insert(index);
        }
        Ok(Self {
            signatures,
            by_id,
            version: version.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    /// Content digest of the document the catalog was loaded from.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn signatures(&self) -> &[OperationSignature] {
        &self.signatures
    }

    pub fn lookup(&self, action_id: &str) -> Option<&OperationSignature> {
        self.by_id.get(action_id).map(|&i| &self.signatures[i])
    }

    pub fn lookup_call(&self, connector: &str, operation: &str) -> Option<&OperationSignature> {
        self.lookup(&format!("{connector}_{operation}"))
            .filter(|s| s.connector == connector && s.operation == operation)
    }

    pub fn contains(&self, connector: &str, operation: &str) -> bool {
        self.lookup_call(connector, operation).is_some()
    }

    pub fn is_trigger(&self, connector: &str, operation: &str) -> bool {
        connector == COMMON_TRIGGER_CONNECTOR
            || self
                .lookup_call(connector, operation)
                .is_some_and(|s| s.is_trigger)
    }

    pub fn triggers(&self) -> impl Iterator<Item = &OperationSignature> {
        self.signatures
            .iter()
            .filter(|s| self.is_trigger(&s.connector, &s.operation))
    }

    pub fn actions(&self) -> impl Iterator<Item = &OperationSignature> {
        self.signatures
            .iter()
            .filter(|s| !self.is_trigger(&s.connector, &s.operation))
    }
}

/// Loads a catalog from its JSON array form.
pub fn load_catalog(document: &str) -> Result<Catalog, CatalogError> {
    let signatures: Vec<OperationSignature> = serde_json::from_str(document)?;
    let digest = Sha256::digest(document.as_bytes());
    let version: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    Catalog::from_signatures(signatures, version)
}

/// Identifiers of a flow split into catalog hits and misses.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Grounding {
    pub known: Vec<OperationSignature>,
    /// Hallucinated `connector_operation` identifiers.
    pub unknown: Vec<String>,
}

impl Grounding {
    pub fn is_grounded(&self) -> bool {
        self.unknown.is_empty()
    }
}

/// Partitions the flow's distinct identifiers, in document order, into
/// known signatures and unknown identifiers.
pub fn signatures_of(flow: &Flow, catalog: &Catalog) -> Grounding {
    let mut grounding = Grounding::default();
    let mut seen = HashSet::new();
    for assignment in flow.body.assignments() {
        let call = &assignment.call;
        let id = call.action_id();
        if !seen.insert(id.clone()) {
            continue;
        }
        match catalog.lookup_call(&call.connector, &call.operation) {
            Some(signature) => grounding.known.push(signature.clone()),
            None => grounding.unknown.push(id),
        }
    }
    grounding
}

/// Dotted names of every operation the flow calls, deduplicated, in
/// document order.
pub fn extract_signature_list(flow: &Flow) -> Vec<String> {
    let mut seen = HashSet::new();
    flow.body
        .assignments()
        .into_iter()
        .map(|a| a.call.dotted_name())
        .filter(|name| seen.insert(name.clone()))
        .collect()
}
