//! Group registry: which badge and beacon belong to which participant, and
//! which participants form a group.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RegistryError {
    #[error("duplicate {kind} id {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("empty {0} id")]
    EmptyId(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantEntry {
    pub participant_id: String,
    pub badge_id: String,
    pub beacon_id: String,
    #[serde(default)]
    pub display_name: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub participants: Vec<ParticipantEntry>,
}

/// Resolved owner of a device id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member<'a> {
    pub group_id: &'a str,
    pub participant: &'a ParticipantEntry,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRegistry {
    pub groups: IndexMap<String, GroupEntry>,
}

impl GroupRegistry {
    pub fn validate(&self) -> Result<(), RegistryError> {
        let mut participants = HashMap::new();
        let mut badges = HashMap::new();
        let mut beacons = HashMap::new();
        for (gid, group) in &self.groups {
            if gid.is_empty() {
                return Err(RegistryError::EmptyId("group"));
            }
            for p in &group.participants {
                for (kind, id, seen) in [
                    ("participant", &p.participant_id, &mut participants),
                    ("badge", &p.badge_id, &mut badges),
                    ("beacon", &p.beacon_id, &mut beacons),
                ] {
                    if id.is_empty() {
                        return Err(RegistryError::EmptyId(kind));
                    }
                    if seen.insert(id.clone(), ()).is_some() {
                        return Err(RegistryError::Duplicate {
                            kind,
                            id: id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Adds or replaces the groups in `other`, then re-validates.
    pub fn merge(&mut self, other: GroupRegistry) -> Result<(), RegistryError> {
        let mut next = self.clone();
        for (gid, group) in other.groups {
            next.groups.insert(gid, group);
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn group(&self, group_id: &str) -> Option<&GroupEntry> {
        self.groups.get(group_id)
    }

    pub fn participant_ids(&self, group_id: &str) -> Vec<String> {
        self.group(group_id)
            .map(|g| {
                g.participants
                    .iter()
                    .map(|p| p.participant_id.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    fn find(&self, pred: impl Fn(&ParticipantEntry) -> bool) -> Option<Member<'_>> {
        self.groups.iter().find_map(|(gid, g)| {
            g.participants
                .iter()
                .find(|p| pred(p))
                .map(|participant| Member {
                    group_id: gid,
                    participant,
                })
        })
    }

    pub fn by_badge(&self, badge_id: &str) -> Option<Member<'_>> {
        self.find(|p| p.badge_id == badge_id)
    }

    pub fn by_beacon(&self, beacon_id: &str) -> Option<Member<'_>> {
        self.find(|p| p.beacon_id == beacon_id)
    }

    pub fn by_participant(&self, participant_id: &str) -> Option<Member<'_>> {
        self.find(|p| p.participant_id == participant_id)
    }
}
