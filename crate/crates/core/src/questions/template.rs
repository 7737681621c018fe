use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Color, Shape};
use crate::program::{FrameRef, Op, Program};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Factual,
    Predictive,
    Counterfactual,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [QuestionType::Factual, QuestionType::Predictive, QuestionType::Counterfactual];

    pub fn name(self) -> &'static str {
        match self {
            QuestionType::Factual => "factual",
            QuestionType::Predictive => "predictive",
            QuestionType::Counterfactual => "counterfactual",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Velocity,
    Acceleration,
    Collision,
    Attribute,
}

impl Category {
    pub fn name(self) -> &'static str {
        match self {
            Category::Velocity => "velocity",
            Category::Acceleration => "acceleration",
            Category::Collision => "collision",
            Category::Attribute => "attribute",
        }
    }
}

/// Referring expression: optional color plus subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Descriptor {
    pub color: Option<Color>,
    pub shape: Shape,
}

impl Descriptor {
    pub fn new(color: Color, shape: Shape) -> Self {
        Self { color: Some(color), shape }
    }

    pub fn shape_only(shape: Shape) -> Self {
        Self { color: None, shape }
    }

    pub fn text(&self) -> String {
        match self.color {
            Some(c) => format!("the {c} {}", self.shape),
            None => format!("the {}", self.shape),
        }
    }

    /// Filters narrowing an object set to this descriptor.
    pub fn filters(&self) -> Vec<Op> {
        let mut ops = Vec::with_capacity(2);
        if let Some(c) = self.color {
            ops.push(Op::FilterColor(c));
        }
        ops.push(Op::FilterShape(self.shape));
        ops
    }

    /// Ops that resolve this descriptor to a single object.
    pub fn select(&self) -> Vec<Op> {
        let mut ops = vec![Op::Objects];
        ops.extend(self.filters());
        ops.push(Op::Unique);
        ops
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FrameAnchor {
    Begin,
    End,
    /// The frame of the collision between two objects.
    Collision(Descriptor, Descriptor),
}

impl FrameAnchor {
    pub fn text(&self) -> String {
        match self {
            FrameAnchor::Begin => "at the beginning".into(),
            FrameAnchor::End => "at the end".into(),
            FrameAnchor::Collision(p, q) => format!("when {} collides with {}", p.text(), q.text()),
        }
    }

    fn frame_ref(&self) -> FrameRef {
        match self {
            FrameAnchor::Begin => FrameRef::Begin,
            FrameAnchor::End => FrameRef::End,
            FrameAnchor::Collision(..) => FrameRef::Stack,
        }
    }

    /// Ops that push the anchor frame; empty unless the anchor is a collision.
    pub fn prefix(&self) -> Vec<Op> {
        match self {
            FrameAnchor::Collision(p, q) => {
                let mut ops = vec![Op::Events];
                ops.extend(p.select());
                ops.push(Op::FilterCollision);
                ops.extend(q.select());
                ops.extend([Op::FilterCollision, Op::Unique, Op::GetFrame]);
                ops
            }
            _ => Vec::new(),
        }
    }
}

/// Slot fillers for one template instantiation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Bindings {
    pub objects: BTreeMap<char, Descriptor>,
    pub frame: Option<FrameAnchor>,
}

impl Bindings {
    pub fn with(mut self, slot: char, d: Descriptor) -> Self {
        self.objects.insert(slot, d);
        self
    }

    pub fn at(mut self, frame: FrameAnchor) -> Self {
        self.frame = Some(frame);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template file: {0}")]
    File(String),
    #[error("template {id}: {msg}")]
    Invalid { id: String, msg: String },
    #[error("template {id}: slot {{{slot}}} is not bound")]
    Unbound { id: String, slot: char },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextPiece {
    Word(String),
    Slot(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Arg {
    Lit(String),
    Frame,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum SkelItem {
    /// Object or shape-only descriptor resolved to one object.
    Select(char),
    /// Descriptor filters over the set on the stack.
    Filter(char),
    Op { name: String, args: Vec<Arg> },
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateDef {
    id: String,
    #[serde(rename = "type")]
    qtype: QuestionType,
    category: Category,
    #[serde(default = "enabled_default")]
    enabled: bool,
    text: String,
    program: Vec<String>,
}

fn enabled_default() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct TemplateFile {
    template: Vec<TemplateDef>,
}

#[derive(Debug, Clone)]
pub struct Template {
    pub id: String,
    pub qtype: QuestionType,
    pub category: Category,
    pub enabled: bool,
    pub text: String,
    pieces: Vec<TextPiece>,
    skeleton: Vec<SkelItem>,
}

/// Lowercases, strips punctuation and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn is_object_slot(c: char) -> bool {
    matches!(c, 'A' | 'B' | 'C')
}

fn parse_pieces(id: &str, text: &str) -> Result<Vec<TextPiece>, TemplateError> {
    let invalid = |msg: String| TemplateError::Invalid { id: id.to_string(), msg };
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        pieces.extend(tokenize(&rest[..open]).into_iter().map(TextPiece::Word));
        let close = rest[open..].find('}').ok_or_else(|| invalid("unclosed slot".into()))? + open;
        let name = &rest[open + 1..close];
        let mut chars = name.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) if is_object_slot(c) || c == 'S' || c == 'F' => pieces.push(TextPiece::Slot(c)),
            _ => return Err(invalid(format!("unknown text slot {{{name}}}"))),
        }
        rest = &rest[close + 1..];
    }
    pieces.extend(tokenize(rest).into_iter().map(TextPiece::Word));
    Ok(pieces)
}

fn parse_item(id: &str, item: &str) -> Result<SkelItem, TemplateError> {
    let invalid = |msg: String| TemplateError::Invalid { id: id.to_string(), msg };
    let item = item.trim();
    if let Some(inner) = item.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
        let (name, filter) = match inner.split_once(':') {
            Some((n, "filter")) => (n, true),
            Some(_) => return Err(invalid(format!("unknown slot modifier in {item}"))),
            None => (inner, false),
        };
        let mut chars = name.chars();
        let c = match (chars.next(), chars.next()) {
            (Some(c), None) if is_object_slot(c) || (c == 'S' && !filter) => c,
            _ => return Err(invalid(format!("bad program slot {item}"))),
        };
        return Ok(if filter { SkelItem::Filter(c) } else { SkelItem::Select(c) });
    }
    let (name, args) = match item.split_once('(') {
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| invalid(format!("unclosed args in {item}")))?;
            let args = inner
                .split(',')
                .map(str::trim)
                .map(|a| if a == "{F}" { Arg::Frame } else { Arg::Lit(a.to_string()) })
                .collect();
            (name.trim(), args)
        }
        None => (item, Vec::new()),
    };
    Ok(SkelItem::Op { name: name.to_string(), args })
}

impl Template {
    fn from_def(def: TemplateDef) -> Result<Self, TemplateError> {
        let pieces = parse_pieces(&def.id, &def.text)?;
        let skeleton = def.program.iter().map(|p| parse_item(&def.id, p)).collect::<Result<Vec<_>, _>>()?;
        let t = Template {
            id: def.id,
            qtype: def.qtype,
            category: def.category,
            enabled: def.enabled,
            text: def.text,
            pieces,
            skeleton,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn pieces(&self) -> &[TextPiece] {
        &self.pieces
    }

    /// Slots appearing in the text, in order of first appearance.
    pub fn text_slots(&self) -> Vec<char> {
        let mut out = Vec::new();
        for p in &self.pieces {
            if let TextPiece::Slot(c) = p {
                if !out.contains(c) {
                    out.push(*c);
                }
            }
        }
        out
    }

    pub fn object_slots(&self) -> Vec<char> {
        self.text_slots().into_iter().filter(|&c| c != 'F').collect()
    }

    pub fn has_frame(&self) -> bool {
        self.text_slots().contains(&'F')
    }

    fn program_slots(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        for item in &self.skeleton {
            match item {
                SkelItem::Select(c) | SkelItem::Filter(c) => {
                    out.insert(*c);
                }
                SkelItem::Op { args, .. } => {
                    if args.contains(&Arg::Frame) {
                        out.insert('F');
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), TemplateError> {
        let invalid = |msg: String| TemplateError::Invalid { id: self.id.clone(), msg };
        let text: BTreeSet<char> = self.text_slots().into_iter().collect();
        if text != self.program_slots() {
            return Err(invalid(format!("text slots {text:?} differ from program slots {:?}", self.program_slots())));
        }
        // Instantiate with placeholder bindings and type-check every frame form.
        let d = Descriptor::new(Color::Red, Shape::Sedan);
        let mut b = Bindings::default();
        for c in self.object_slots() {
            b.objects.insert(c, if c == 'S' { Descriptor::shape_only(Shape::Sedan) } else { d });
        }
        let frames: Vec<Option<FrameAnchor>> = if self.has_frame() {
            vec![Some(FrameAnchor::Begin), Some(FrameAnchor::End), Some(FrameAnchor::Collision(d, d))]
        } else {
            vec![None]
        };
        for f in frames {
            let p = self.instantiate(&Bindings { frame: f, ..b.clone() })?;
            p.check_answerable().map_err(|e| invalid(e.to_string()))?;
        }
        Ok(())
    }

    fn descriptor(&self, b: &Bindings, slot: char) -> Result<Descriptor, TemplateError> {
        b.objects.get(&slot).copied().ok_or(TemplateError::Unbound { id: self.id.clone(), slot })
    }

    fn anchor(&self, b: &Bindings) -> Result<FrameAnchor, TemplateError> {
        b.frame.ok_or(TemplateError::Unbound { id: self.id.clone(), slot: 'F' })
    }

    /// Surface text for the given bindings.
    pub fn render(&self, b: &Bindings) -> Result<String, TemplateError> {
        let mut out = String::new();
        let mut rest = self.text.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let slot = rest[open + 1..].chars().next().expect("validated slot");
            let filler = if slot == 'F' { self.anchor(b)?.text() } else { self.descriptor(b, slot)?.text() };
            out.push_str(&filler);
            rest = &rest[open + 3..];
        }
        out.push_str(rest);
        let mut chars = out.chars();
        Ok(match chars.next() {
            Some(c) => c.to_uppercase().chain(chars).collect(),
            None => out,
        })
    }

    /// Program for the given bindings.
    pub fn instantiate(&self, b: &Bindings) -> Result<Program, TemplateError> {
        let invalid = |msg: String| TemplateError::Invalid { id: self.id.clone(), msg };
        let mut ops = Vec::new();
        let anchor = if self.has_frame() { Some(self.anchor(b)?) } else { None };
        if let Some(a) = &anchor {
            ops.extend(a.prefix());
        }
        for item in &self.skeleton {
            match item {
                SkelItem::Select(c) => ops.extend(self.descriptor(b, *c)?.select()),
                SkelItem::Filter(c) => ops.extend(self.descriptor(b, *c)?.filters()),
                SkelItem::Op { name, args } => {
                    let args: Vec<String> = args
                        .iter()
                        .map(|a| match a {
                            Arg::Lit(s) => s.clone(),
                            Arg::Frame => anchor.expect("frame slot checked").frame_ref().name().to_string(),
                        })
                        .collect();
                    ops.push(Op::parse(name, &args).map_err(|e| invalid(e.to_string()))?);
                }
            }
        }
        Ok(Program::new(ops))
    }

    /// Recovers bindings from a program instantiated from this template.
    pub fn match_program(&self, program: &Program) -> Option<Bindings> {
        let ops = program.ops();
        let mut b = Bindings::default();
        let mut i = 0;
        if self.has_frame() {
            if let Some((anchor, used)) = match_anchor(ops) {
                b.frame = Some(anchor);
                i = used;
            }
        }
        for item in &self.skeleton {
            match item {
                SkelItem::Select(c) => {
                    let (d, used) = match_select(&ops[i..], *c == 'S')?;
                    bind(&mut b, *c, d)?;
                    i += used;
                }
                SkelItem::Filter(c) => {
                    let (d, used) = match_filters(&ops[i..], true)?;
                    bind(&mut b, *c, d)?;
                    i += used;
                }
                SkelItem::Op { name, args } => {
                    let op = ops.get(i)?;
                    if op.name() != name {
                        return None;
                    }
                    let actual = op.args();
                    if actual.len() != args.len() {
                        return None;
                    }
                    for (a, got) in args.iter().zip(&actual) {
                        match a {
                            Arg::Lit(s) if s == got => {}
                            Arg::Lit(_) => return None,
                            Arg::Frame => {
                                let expected = match b.frame {
                                    Some(f) => f.frame_ref().name(),
                                    None => {
                                        let f = match got.as_str() {
                                            "begin" => FrameAnchor::Begin,
                                            "end" => FrameAnchor::End,
                                            _ => return None,
                                        };
                                        b.frame = Some(f);
                                        f.frame_ref().name()
                                    }
                                };
                                if expected != got {
                                    return None;
                                }
                            }
                        }
                    }
                    i += 1;
                }
            }
        }
        if i != ops.len() || (self.has_frame() && b.frame.is_none()) {
            return None;
        }
        (self.instantiate(&b).ok()? == *program).then_some(b)
    }
}

fn bind(b: &mut Bindings, slot: char, d: Descriptor) -> Option<()> {
    match b.objects.insert(slot, d) {
        Some(prev) if prev != d => None,
        _ => Some(()),
    }
}

fn match_filters(ops: &[Op], with_color: bool) -> Option<(Descriptor, usize)> {
    match (with_color, ops) {
        (true, [Op::FilterColor(c), Op::FilterShape(s), ..]) => Some((Descriptor::new(*c, *s), 2)),
        (false, [Op::FilterShape(s), ..]) => Some((Descriptor::shape_only(*s), 1)),
        _ => None,
    }
}

fn match_select(ops: &[Op], shape_only: bool) -> Option<(Descriptor, usize)> {
    if ops.first() != Some(&Op::Objects) {
        return None;
    }
    let (d, used) = match_filters(&ops[1..], !shape_only)?;
    (ops.get(1 + used) == Some(&Op::Unique)).then_some((d, used + 2))
}

fn match_anchor(ops: &[Op]) -> Option<(FrameAnchor, usize)> {
    if ops.first() != Some(&Op::Events) {
        return None;
    }
    let mut i = 1;
    let (p, used) = match_select(&ops[i..], false)?;
    i += used;
    (ops.get(i) == Some(&Op::FilterCollision)).then_some(())?;
    i += 1;
    let (q, used) = match_select(&ops[i..], false)?;
    i += used;
    let tail = [Op::FilterCollision, Op::Unique, Op::GetFrame];
    (ops.get(i..i + 3)? == tail).then_some(())?;
    Some((FrameAnchor::Collision(p, q), i + 3))
}

/// All templates, in file order.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: Vec<Template>,
}

const BUILTIN: &str = include_str!("templates.toml");

impl TemplateSet {
    pub fn builtin() -> Self {
        Self::from_toml(BUILTIN).expect("built-in templates are valid")
    }

    pub fn from_toml(src: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = toml::from_str(src).map_err(|e| TemplateError::File(e.to_string()))?;
        let templates = file.template.into_iter().map(Template::from_def).collect::<Result<Vec<_>, _>>()?;
        let mut ids = BTreeSet::new();
        for t in &templates {
            if !ids.insert(t.id.clone()) {
                return Err(TemplateError::Invalid { id: t.id.clone(), msg: "duplicate id".into() });
            }
        }
        Ok(Self { templates })
    }

    pub fn all(&self) -> &[Template] {
        &self.templates
    }

    pub fn enabled(&self) -> impl Iterator<Item = &Template> {
        self.templates.iter().filter(|t| t.enabled)
    }

    pub fn get(&self, id: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_load() {
        let set = TemplateSet::builtin();
        assert!(set.all().len() >= 20);
        for q in QuestionType::ALL {
            assert!(set.enabled().any(|t| t.qtype == q), "{q}");
        }
        assert!(!set.get("attribute_color").unwrap().enabled);
    }

    #[test]
    fn render_velocity_question() {
        let set = TemplateSet::builtin();
        let t = set.get("velocity_fast").unwrap();
        let b = Bindings::default()
            .with('A', Descriptor::new(Color::Red, Shape::MountainBike))
            .at(FrameAnchor::Begin);
        assert_eq!(t.render(&b).unwrap(), "Is the red mountain bike moving fast at the beginning?");
        assert_eq!(t.render(&b).unwrap(), t.render(&b.clone()).unwrap());
        let p = t.instantiate(&b).unwrap();
        assert_eq!(
            p.to_string(),
            "[objects, filter_color(red), filter_shape(mountain bike), unique, query_moving_velocity(begin), equal_velocity(fast)]"
        );
    }

    #[test]
    fn unbound_slot_is_an_error() {
        let set = TemplateSet::builtin();
        let t = set.get("velocity_fast").unwrap();
        let b = Bindings::default().with('A', Descriptor::new(Color::Red, Shape::Sedan));
        assert_eq!(t.render(&b), Err(TemplateError::Unbound { id: t.id.clone(), slot: 'F' }));
        assert!(t.instantiate(&Bindings::default()).is_err());
    }

    #[test]
    fn collision_anchor_text_and_program() {
        let set = TemplateSet::builtin();
        let t = set.get("acceleration_is").unwrap();
        let p = Descriptor::new(Color::Red, Shape::Sedan);
        let q = Descriptor::new(Color::Blue, Shape::Truck);
        let b = Bindings::default().with('A', q).at(FrameAnchor::Collision(p, q));
        assert_eq!(t.render(&b).unwrap(), "Is the blue truck accelerating when the red sedan collides with the blue truck?");
        let prog = t.instantiate(&b).unwrap();
        assert_eq!(prog.ops()[0], Op::Events);
        assert_eq!(*prog.ops().last().unwrap(), Op::IsAccelerating(FrameRef::Stack));
        assert_eq!(t.match_program(&prog), Some(b));
    }

    #[test]
    fn match_program_inverts_instantiate() {
        let set = TemplateSet::builtin();
        let a = Descriptor::new(Color::Gray, Shape::Jet);
        let bb = Descriptor::new(Color::Cyan, Shape::SchoolBus);
        let c = Descriptor::new(Color::Purple, Shape::Scooter);
        for t in set.all() {
            let mut b = Bindings::default();
            for s in t.object_slots() {
                let d = match s {
                    'A' => a,
                    'B' => bb,
                    'C' => c,
                    _ => Descriptor::shape_only(Shape::Airliner),
                };
                b.objects.insert(s, d);
            }
            if t.has_frame() {
                b.frame = Some(FrameAnchor::End);
            }
            let p = t.instantiate(&b).unwrap();
            assert_eq!(t.match_program(&p), Some(b.clone()), "{}", t.id);
            for other in set.all().iter().filter(|o| o.id != t.id) {
                assert_eq!(other.match_program(&p), None, "{} vs {}", t.id, other.id);
            }
        }
    }

    #[test]
    fn tokenizer_strips_punctuation() {
        assert_eq!(tokenize("Is the Red sedan static?"), ["is", "the", "red", "sedan", "static"]);
    }

    #[test]
    fn bad_templates_rejected() {
        let missing_slot = r#"
            [[template]]
            id = "x"
            type = "factual"
            category = "velocity"
            text = "Is {A} static?"
            program = ["objects", "exist"]
        "#;
        assert!(TemplateSet::from_toml(missing_slot).is_err());
        let ill_typed = r#"
            [[template]]
            id = "x"
            type = "factual"
            category = "velocity"
            text = "Is {A} static?"
            program = ["{A}", "exist"]
        "#;
        assert!(TemplateSet::from_toml(ill_typed).is_err());
    }
}
