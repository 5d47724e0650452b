//! JSON messages exchanged with session clients.
//!
//! Every message is an object with a `"type"` discriminator. Clients send
//! `cmd`, `course_save`, `course_load` and `reset`; the service sends each
//! [`SessionEvent`] under its own name plus `course`, `reset` and `error`
//! notices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::course::{self, Course, CourseError};
use crate::protocol::Command;
use crate::session::SessionEvent;

#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Cmd(Command),
    CourseSave(Course),
    CourseLoad { name: String },
    Reset,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RawClientMessage {
    Cmd { key: String },
    CourseSave { course: serde_json::Value },
    CourseLoad { name: String },
    Reset,
}

#[derive(Debug, Error)]
pub enum MessageError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad course name {0:?}")]
    BadName(String),
    #[error(transparent)]
    Course(#[from] CourseError),
}

impl MessageError {
    /// Named course violations, when that is what went wrong.
    pub fn violations(&self) -> Vec<String> {
        match self {
            MessageError::Course(CourseError::Invalid(v)) => {
                v.iter().map(ToString::to_string).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Course names double as file stems in the course library.
pub fn valid_course_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage, MessageError> {
    let raw: RawClientMessage =
        serde_json::from_str(text).map_err(|e| MessageError::Malformed(e.to_string()))?;
    Ok(match raw {
        RawClientMessage::Cmd { key } => match Command::from_key(&key) {
            Some(cmd) => ClientMessage::Cmd(cmd),
            None => return Err(MessageError::UnknownKey(key)),
        },
        RawClientMessage::CourseSave { course } => {
            let course = course::from_value(course)?;
            if !valid_course_name(&course.name) {
                return Err(MessageError::BadName(course.name));
            }
            ClientMessage::CourseSave(course)
        }
        RawClientMessage::CourseLoad { name } => {
            if !valid_course_name(&name) {
                return Err(MessageError::BadName(name));
            }
            ClientMessage::CourseLoad { name }
        }
        RawClientMessage::Reset => ClientMessage::Reset,
    })
}

impl ClientMessage {
    pub fn to_json(&self) -> String {
        let v = match self {
            ClientMessage::Cmd(cmd) => {
                serde_json::json!({"type": "cmd", "key": cmd.key().to_string()})
            }
            ClientMessage::CourseSave(c) => {
                serde_json::json!({"type": "course_save", "course": course::to_value(c)})
            }
            ClientMessage::CourseLoad { name } => {
                serde_json::json!({"type": "course_load", "name": name})
            }
            ClientMessage::Reset => serde_json::json!({"type": "reset"}),
        };
        v.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Notice {
    Course {
        course: Course,
    },
    Reset,
    Error {
        reason: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        violations: Vec<String>,
    },
}

impl Notice {
    pub fn error(e: &MessageError) -> Notice {
        Notice::Error {
            reason: e.to_string(),
            violations: e.violations(),
        }
    }
}

/// Anything the service sends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerMessage {
    Event(SessionEvent),
    Notice(Notice),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

impl From<SessionEvent> for ServerMessage {
    fn from(e: SessionEvent) -> Self {
        ServerMessage::Event(e)
    }
}

impl From<Notice> for ServerMessage {
    fn from(n: Notice) -> Self {
        ServerMessage::Notice(n)
    }
}
