//! Obstacle courses: the authored game world.
//!
//! Every obstacle is a disc. A course is saved as a JSON document:
//!
//! ```json
//! {"v":1,"name":"yard","bounds":{"min_x":0,"min_y":0,"max_x":4,"max_y":3},
//!  "start":{"x":0.5,"y":1.5,"theta":0},"goal":{"x":3.5,"y":1.5,"radius":0.2},
//!  "obstacles":[{"id":0,"kind":"tree","x":2,"y":1.5,"radius":0.15}]}
//! ```
//!
//! Obstacle kinds are `"tree"`, `"stone"` or `"custom:<label>"`. Unknown keys
//! are ignored on load.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Pose, DEFAULT_BODY_RADIUS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObstacleKind {
    Tree,
    Stone,
    Custom(String),
}

impl fmt::Display for ObstacleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObstacleKind::Tree => f.write_str("tree"),
            ObstacleKind::Stone => f.write_str("stone"),
            ObstacleKind::Custom(label) => write!(f, "custom:{label}"),
        }
    }
}

impl std::str::FromStr for ObstacleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(ObstacleKind::Tree),
            "stone" => Ok(ObstacleKind::Stone),
            _ => match s.strip_prefix("custom:") {
                Some(label) => Ok(ObstacleKind::Custom(label.to_string())),
                None => Err(format!("unknown obstacle kind {s:?}")),
            },
        }
    }
}

impl Serialize for ObstacleKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ObstacleKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub kind: ObstacleKind,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn contains_disc(&self, x: f64, y: f64, r: f64) -> bool {
        x - r >= self.min_x && x + r <= self.max_x && y - r >= self.min_y && y + r <= self.max_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl Goal {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.x).hypot(y - self.y) < self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Course {
    pub name: String,
    pub bounds: Bounds,
    pub start: Pose,
    pub goal: Goal,
    pub obstacles: Vec<Obstacle>,
}

impl Default for Course {
    /// An empty 4 m x 3 m yard.
    fn default() -> Self {
        Self {
            name: "yard".into(),
            bounds: Bounds {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 4.0,
                max_y: 3.0,
            },
            start: Pose::new(0.5, 1.5, 0.0),
            goal: Goal {
                x: 3.5,
                y: 1.5,
                radius: 0.2,
            },
            obstacles: Vec::new(),
        }
    }
}

/// A broken course invariant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Violation {
    DegenerateBounds,
    NonFinite { field: String },
    GoalRadius,
    GoalOutsideBounds,
    ObstacleRadius { id: u32 },
    ObstacleOutsideBounds { id: u32 },
    DuplicateId { id: u32 },
    StartOverlapsObstacle { id: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DegenerateBounds => f.write_str("bounds: max must exceed min on both axes"),
            Violation::NonFinite { field } => write!(f, "{field}: value is not finite"),
            Violation::GoalRadius => f.write_str("goal: radius must be > 0"),
            Violation::GoalOutsideBounds => f.write_str("goal outside bounds"),
            Violation::ObstacleRadius { id } => write!(f, "obstacle {id}: radius must be > 0"),
            Violation::ObstacleOutsideBounds { id } => write!(f, "obstacle {id} outside bounds"),
            Violation::DuplicateId { id } => write!(f, "obstacle id {id} is duplicated"),
            Violation::StartOverlapsObstacle { id } => {
                write!(f, "start overlaps obstacle {id}")
            }
        }
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum CourseError {
    #[error("obstacle {0} not found")]
    NotFound(u32),
    #[error("course rejected: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("malformed course document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported course schema version {0}")]
    Version(u32),
    #[error("no obstacle ids left")]
    IdsExhausted,
}

/// Checks every course invariant; empty means valid.
// Negated comparisons so that NaN fails them.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn validate(c: &Course) -> Vec<Violation> {
    let mut out = Vec::new();
    let finite = |field: &str, v: f64, out: &mut Vec<Violation>| {
        if !v.is_finite() {
            out.push(Violation::NonFinite {
                field: field.to_string(),
            });
        }
    };
    let b = &c.bounds;
    for (f, v) in [
        ("bounds.min_x", b.min_x),
        ("bounds.min_y", b.min_y),
        ("bounds.max_x", b.max_x),
        ("bounds.max_y", b.max_y),
        ("start.x", c.start.x),
        ("start.y", c.start.y),
        ("start.theta", c.start.theta),
        ("goal.x", c.goal.x),
        ("goal.y", c.goal.y),
        ("goal.radius", c.goal.radius),
    ] {
        finite(f, v, &mut out);
    }
    if !(b.max_x > b.min_x && b.max_y > b.min_y) {
        out.push(Violation::DegenerateBounds);
    }
    if !(c.goal.radius > 0.0) {
        out.push(Violation::GoalRadius);
    } else if !b.contains_disc(c.goal.x, c.goal.y, c.goal.radius) {
        out.push(Violation::GoalOutsideBounds);
    }

    let mut seen = std::collections::BTreeSet::new();
    for o in &c.obstacles {
        if !seen.insert(o.id) {
            out.push(Violation::DuplicateId { id: o.id });
        }
        for (f, v) in [("x", o.x), ("y", o.y), ("radius", o.radius)] {
            finite(&format!("obstacle {}.{f}", o.id), v, &mut out);
        }
        if !(o.radius > 0.0) {
            out.push(Violation::ObstacleRadius { id: o.id });
        } else if !b.contains_disc(o.x, o.y, o.radius) {
            out.push(Violation::ObstacleOutsideBounds { id: o.id });
        }
        if overlaps(&c.start, DEFAULT_BODY_RADIUS, o) {
            out.push(Violation::StartOverlapsObstacle { id: o.id });
        }
    }
    out
}

fn overlaps(p: &Pose, body_radius: f64, o: &Obstacle) -> bool {
    (p.x - o.x).hypot(p.y - o.y) < body_radius + o.radius
}

/// Lowest id of an obstacle overlapping the car disc. Touching is not a hit.
pub fn check_collision(p: &Pose, body_radius: f64, c: &Course) -> Option<u32> {
    c.obstacles
        .iter()
        .filter(|o| overlaps(p, body_radius, o))
        .map(|o| o.id)
        .min()
}

impl Course {
    pub fn obstacle(&self, id: u32) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.id == id)
    }

    fn next_id(&self) -> u32 {
        self.obstacles
            .iter()
            .map(|o| o.id.saturating_add(1))
            .max()
            .unwrap_or(0)
    }

    fn checked(self) -> Result<Course, CourseError> {
        let v = validate(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(CourseError::Invalid(v))
        }
    }
}

/// Adds an obstacle with id one past the largest existing id.
pub fn author_add(
    c: &Course,
    kind: ObstacleKind,
    x: f64,
    y: f64,
    radius: f64,
) -> Result<(Course, u32), CourseError> {
    let id = c.next_id();
    add_with_id(c, id, kind, x, y, radius).map(|c| (c, id))
}

fn add_with_id(
    c: &Course,
    id: u32,
    kind: ObstacleKind,
    x: f64,
    y: f64,
    radius: f64,
) -> Result<Course, CourseError> {
    let mut next = c.clone();
    next.obstacles.push(Obstacle {
        id,
        kind,
        x,
        y,
        radius,
    });
    next.checked()
}

pub fn author_move(c: &Course, id: u32, x: f64, y: f64) -> Result<Course, CourseError> {
    let mut next = c.clone();
    let o = next
        .obstacles
        .iter_mut()
        .find(|o| o.id == id)
        .ok_or(CourseError::NotFound(id))?;
    o.x = x;
    o.y = y;
    next.checked()
}

pub fn author_remove(c: &Course, id: u32) -> Result<Course, CourseError> {
    if c.obstacle(id).is_none() {
        return Err(CourseError::NotFound(id));
    }
    let mut next = c.clone();
    next.obstacles.retain(|o| o.id != id);
    Ok(next)
}

/// Authoring session that never hands out an id twice, even after removals.
#[derive(Debug, Clone, PartialEq)]
pub struct CourseEditor {
    course: Course,
    high_water: u64,
}

impl CourseEditor {
    pub fn new(course: Course) -> Self {
        let high_water = course
            .obstacles
            .iter()
            .map(|o| u64::from(o.id) + 1)
            .max()
            .unwrap_or(0);
        Self { course, high_water }
    }

    pub fn course(&self) -> &Course {
        &self.course
    }

    pub fn into_course(self) -> Course {
        self.course
    }

    pub fn add(
        &mut self,
        kind: ObstacleKind,
        x: f64,
        y: f64,
        radius: f64,
    ) -> Result<u32, CourseError> {
        let id = u32::try_from(self.high_water).map_err(|_| CourseError::IdsExhausted)?;
        self.course = add_with_id(&self.course, id, kind, x, y, radius)?;
        self.high_water = u64::from(id) + 1;
        Ok(id)
    }

    pub fn move_to(&mut self, id: u32, x: f64, y: f64) -> Result<(), CourseError> {
        self.course = author_move(&self.course, id, x, y)?;
        Ok(())
    }

    pub fn remove(&mut self, id: u32) -> Result<(), CourseError> {
        self.course = author_remove(&self.course, id)?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct StartDoc {
    x: f64,
    y: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct CourseDoc {
    v: u32,
    name: String,
    bounds: Bounds,
    start: StartDoc,
    goal: Goal,
    obstacles: Vec<Obstacle>,
}

impl From<&Course> for CourseDoc {
    fn from(c: &Course) -> Self {
        CourseDoc {
            v: SCHEMA_VERSION,
            name: c.name.clone(),
            bounds: c.bounds,
            start: StartDoc {
                x: c.start.x,
                y: c.start.y,
                theta: c.start.theta,
            },
            goal: c.goal,
            obstacles: c.obstacles.clone(),
        }
    }
}

impl CourseDoc {
    fn into_course(self) -> Result<Course, CourseError> {
        if self.v != SCHEMA_VERSION {
            return Err(CourseError::Version(self.v));
        }
        Course {
            name: self.name,
            bounds: self.bounds,
            start: Pose {
                x: self.start.x,
                y: self.start.y,
                theta: self.start.theta,
                t: 0.0,
            },
            goal: self.goal,
            obstacles: self.obstacles,
        }
        .checked()
    }
}

fn parse_error(e: serde_json::Error) -> CourseError {
    CourseError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Serializes a valid course.
pub fn save(c: &Course) -> Result<Vec<u8>, CourseError> {
    let v = validate(c);
    if !v.is_empty() {
        return Err(CourseError::Invalid(v));
    }
    serde_json::to_vec_pretty(&CourseDoc::from(c)).map_err(parse_error)
}

/// Parses and validates a course document.
pub fn load(bytes: &[u8]) -> Result<Course, CourseError> {
    let doc: CourseDoc = serde_json::from_slice(bytes).map_err(parse_error)?;
    doc.into_course()
}

/// Same as [`load`], from an already-parsed JSON value.
pub fn from_value(value: serde_json::Value) -> Result<Course, CourseError> {
    let doc: CourseDoc = serde_json::from_value(value).map_err(parse_error)?;
    doc.into_course()
}

pub fn to_value(c: &Course) -> serde_json::Value {
    serde_json::to_value(CourseDoc::from(c)).expect("course document always serializes")
}

impl Serialize for Course {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CourseDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Course {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        CourseDoc::deserialize(d)?
            .into_course()
            .map_err(serde::de::Error::custom)
    }
}

/// Outcome of one drive over a course.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunResult {
    pub elapsed: f64,
    pub collision_count: u32,
    pub reached_goal: bool,
}

/// Counts contact episodes: a new one starts only after full separation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpisodeCounter {
    in_contact: bool,
    pub count: u32,
}

impl EpisodeCounter {
    /// Returns true when `contact` opens a new episode.
    pub fn observe(&mut self, contact: bool) -> bool {
        let started = contact && !self.in_contact;
        self.in_contact = contact;
        if started {
            self.count += 1;
        }
        started
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub pose: Pose,
    pub collision: Option<u32>,
}

/// Scores a time-ordered trace. Times are the poses' own `t` values.
pub fn score(trace: &[TracePoint], c: &Course) -> RunResult {
    let mut episodes = EpisodeCounter::default();
    let mut goal_at = None;
    for p in trace {
        episodes.observe(p.collision.is_some());
        if goal_at.is_none() && c.goal.contains(p.pose.x, p.pose.y) {
            goal_at = Some(p.pose.t);
        }
    }
    RunResult {
        elapsed: goal_at
            .or_else(|| trace.last().map(|p| p.pose.t))
            .unwrap_or(0.0)
            .max(0.0),
        collision_count: episodes.count,
        reached_goal: goal_at.is_some(),
    }
}
