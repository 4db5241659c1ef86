use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Embodiment-agnostic high-level navigation action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveForward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    /// Canonical order, also used to break score ties.
    pub const ALL: [Action; 4] = [Action::MoveForward, Action::TurnLeft, Action::TurnRight, Action::Stop];

    pub fn label(self) -> &'static str {
        match self {
            Action::MoveForward => "move forward",
            Action::TurnLeft => "turn left",
            Action::TurnRight => "turn right",
            Action::Stop => "stop",
        }
    }

    pub fn is_turn(self) -> bool {
        matches!(self, Action::TurnLeft | Action::TurnRight)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownAction(pub String);

impl fmt::Display for UnknownAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown action {:?}", self.0)
    }
}

impl std::error::Error for UnknownAction {}

impl FromStr for Action {
    type Err = UnknownAction;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String =
            s.trim().to_ascii_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ");
        match norm.as_str() {
            "move forward" | "forward" => Ok(Action::MoveForward),
            "turn left" | "left" => Ok(Action::TurnLeft),
            "turn right" | "right" => Ok(Action::TurnRight),
            "stop" => Ok(Action::Stop),
            _ => Err(UnknownAction(s.to_string())),
        }
    }
}

/// Left or right, shared by turn actions, junctions and structural landmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Left,
    Right,
}

impl TurnDirection {
    pub fn action(self) -> Action {
        match self {
            TurnDirection::Left => Action::TurnLeft,
            TurnDirection::Right => Action::TurnRight,
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            TurnDirection::Left => TurnDirection::Right,
            TurnDirection::Right => TurnDirection::Left,
        }
    }
}
