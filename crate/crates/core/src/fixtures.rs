//! Shipped fixture worlds and oracle rules.

use crate::simulator::{GridWorld, SimError};

pub const WORLDS: [(&str, &str); 6] = [
    ("corridor_a", include_str!("../worlds/corridor_a.json")),
    ("corridor_b", include_str!("../worlds/corridor_b.json")),
    ("office_a", include_str!("../worlds/office_a.json")),
    ("office_b", include_str!("../worlds/office_b.json")),
    ("two_floor", include_str!("../worlds/two_floor.json")),
    ("outdoor_park", include_str!("../worlds/outdoor_park.json")),
];

pub const ORACLE_RULES_JSON: &str = include_str!("../worlds/oracle_rules.json");

pub fn world_names() -> Vec<&'static str> {
    WORLDS.iter().map(|(n, _)| *n).collect()
}

pub fn world_json(name: &str) -> Option<&'static str> {
    WORLDS.iter().find(|(n, _)| *n == name).map(|(_, j)| *j)
}

pub fn world(name: &str) -> Result<GridWorld, SimError> {
    let json = world_json(name).ok_or_else(|| SimError::Schema(format!("unknown fixture world {name:?}")))?;
    GridWorld::from_json(json)
}

pub fn all_worlds() -> Vec<GridWorld> {
    WORLDS.iter().map(|(_, j)| GridWorld::from_json(j).expect("fixture worlds are valid")).collect()
}

pub fn oracle_rules() -> crate::reasoning::OracleRules {
    crate::reasoning::OracleRules::from_json(ORACLE_RULES_JSON).expect("fixture rules are valid")
}
