//! Grammar parser from templated question text to programs.

use std::collections::BTreeMap;

use crate::model::{Color, Shape};
use crate::program::Program;
use crate::questions::{tokenize, Bindings, Descriptor, FrameAnchor, Template, TemplateSet, TextPiece};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("no template matches {text:?}; nearest is {nearest:?} ({template})")]
    NoMatch { text: String, template: String, nearest: String },
    #[error("{text:?} is ambiguous between {first} and {second}")]
    Ambiguous { text: String, first: String, second: String },
    #[error("empty question")]
    Empty,
    #[error("program matches no template: {0}")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Edge<'a> {
    Word(&'a str),
    Slot(char),
}

#[derive(Debug, Default)]
struct Node<'a> {
    edges: BTreeMap<Edge<'a>, usize>,
    accept: Vec<usize>,
}

/// Templates compiled into a token trie whose slot edges capture
/// descriptors and frame anchors.
#[derive(Debug)]
pub struct ParseGrammar<'a> {
    templates: &'a TemplateSet,
    nodes: Vec<Node<'a>>,
    colors: Vec<(Vec<String>, Color)>,
    shapes: Vec<(Vec<String>, Shape)>,
}

#[derive(Debug, Clone)]
struct Partial {
    pos: usize,
    bindings: Bindings,
}

impl<'a> ParseGrammar<'a> {
    /// Compiles every template, enabled or not.
    pub fn new(templates: &'a TemplateSet) -> Self {
        let mut nodes = vec![Node::default()];
        for (ti, t) in templates.all().iter().enumerate() {
            let mut at = 0;
            for piece in t.pieces() {
                let edge = match piece {
                    TextPiece::Word(w) => Edge::Word(w.as_str()),
                    TextPiece::Slot(c) => Edge::Slot(*c),
                };
                at = match nodes[at].edges.get(&edge) {
                    Some(&next) => next,
                    None => {
                        nodes.push(Node::default());
                        let next = nodes.len() - 1;
                        nodes[at].edges.insert(edge, next);
                        next
                    }
                };
            }
            nodes[at].accept.push(ti);
        }
        let words = |s: &str| tokenize(s);
        let colors = Color::ALL.iter().map(|c| (words(c.name()), *c)).collect();
        let mut shapes: Vec<(Vec<String>, Shape)> = Shape::ALL.iter().map(|s| (words(s.name()), *s)).collect();
        // Longest names first so "mountain bike" wins over any shorter prefix.
        shapes.sort_by_key(|s| std::cmp::Reverse(s.0.len()));
        Self { templates, nodes, colors, shapes }
    }

    fn prefixed<T: Copy>(table: &[(Vec<String>, T)], tokens: &[String], pos: usize) -> Vec<(T, usize)> {
        table
            .iter()
            .filter(|(w, _)| tokens.get(pos..pos + w.len()).is_some_and(|s| s == w.as_slice()))
            .map(|(w, v)| (*v, pos + w.len()))
            .collect()
    }

    /// "the" [color] shape, optionally requiring the color.
    fn descriptors(&self, tokens: &[String], pos: usize, colored: bool) -> Vec<(Descriptor, usize)> {
        if tokens.get(pos).map(String::as_str) != Some("the") {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (color, after) in Self::prefixed(&self.colors, tokens, pos + 1) {
            for (shape, end) in Self::prefixed(&self.shapes, tokens, after) {
                out.push((Descriptor::new(color, shape), end));
            }
        }
        if !colored {
            for (shape, end) in Self::prefixed(&self.shapes, tokens, pos + 1) {
                out.push((Descriptor::shape_only(shape), end));
            }
        }
        out
    }

    fn words(tokens: &[String], pos: usize, words: &[&str]) -> Option<usize> {
        let end = pos + words.len();
        (tokens.get(pos..end)?.iter().zip(words).all(|(t, w)| t == w)).then_some(end)
    }

    fn anchors(&self, tokens: &[String], pos: usize) -> Vec<(FrameAnchor, usize)> {
        let mut out = Vec::new();
        if let Some(end) = Self::words(tokens, pos, &["at", "the", "beginning"]) {
            out.push((FrameAnchor::Begin, end));
        }
        if let Some(end) = Self::words(tokens, pos, &["at", "the", "end"]) {
            out.push((FrameAnchor::End, end));
        }
        if tokens.get(pos).map(String::as_str) == Some("when") {
            for (p, after) in self.descriptors(tokens, pos + 1, true) {
                let Some(mid) = Self::words(tokens, after, &["collides", "with"]) else { continue };
                for (q, end) in self.descriptors(tokens, mid, true) {
                    out.push((FrameAnchor::Collision(p, q), end));
                }
            }
        }
        out
    }

    fn walk(&self, tokens: &[String], node: usize, state: Partial, out: &mut Vec<(usize, Bindings)>) {
        let n = &self.nodes[node];
        if state.pos == tokens.len() {
            out.extend(n.accept.iter().map(|&t| (t, state.bindings.clone())));
        }
        for (edge, &next) in &n.edges {
            match *edge {
                Edge::Word(w) => {
                    if tokens.get(state.pos).map(String::as_str) == Some(w) {
                        self.walk(tokens, next, Partial { pos: state.pos + 1, bindings: state.bindings.clone() }, out);
                    }
                }
                Edge::Slot('F') => {
                    for (a, end) in self.anchors(tokens, state.pos) {
                        self.walk(tokens, next, Partial { pos: end, bindings: state.bindings.clone().at(a) }, out);
                    }
                }
                Edge::Slot(c) => {
                    for (d, end) in self.descriptors(tokens, state.pos, c != 'S') {
                        if c == 'S' && d.color.is_some() {
                            continue;
                        }
                        self.walk(tokens, next, Partial { pos: end, bindings: state.bindings.clone().with(c, d) }, out);
                    }
                }
            }
        }
    }

    /// Parses question text into the program of the single matching template.
    pub fn parse(&self, text: &str) -> Result<Program, ParseError> {
        self.parse_with_template(text).map(|(_, p)| p)
    }

    /// As `parse`, also returning the matched template.
    pub fn parse_with_template(&self, text: &str) -> Result<(&'a Template, Program), ParseError> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut matches = Vec::new();
        self.walk(&tokens, 0, Partial { pos: 0, bindings: Bindings::default() }, &mut matches);
        let mut found: Vec<(&Template, Program)> = Vec::new();
        for (ti, b) in matches {
            let t = &self.templates.all()[ti];
            let Ok(p) = t.instantiate(&b) else { continue };
            if let Some((prev, other)) = found.first() {
                if *other != p {
                    return Err(ParseError::Ambiguous { text: text.into(), first: prev.id.clone(), second: t.id.clone() });
                }
            } else {
                found.push((t, p));
            }
        }
        found.pop().ok_or_else(|| {
            let t = self.nearest(&tokens);
            ParseError::NoMatch { text: text.into(), template: t.id.clone(), nearest: t.text.clone() }
        })
    }

    /// Template sharing the most literal words with the input.
    fn nearest(&self, tokens: &[String]) -> &'a Template {
        let score = |t: &Template| {
            let words: Vec<&str> = t
                .pieces()
                .iter()
                .filter_map(|p| match p {
                    TextPiece::Word(w) => Some(w.as_str()),
                    TextPiece::Slot(_) => None,
                })
                .collect();
            let hits = words.iter().filter(|w| tokens.iter().any(|t| t == *w)).count();
            hits as f64 / (words.len() + tokens.len()) as f64
        };
        self.templates
            .all()
            .iter()
            .max_by(|a, b| score(a).total_cmp(&score(b)))
            .expect("template set is never empty")
    }

    /// Renders a program back to question text through its template.
    pub fn unparse(&self, program: &Program) -> Result<String, ParseError> {
        for t in self.templates.all() {
            if let Some(b) = t.match_program(program) {
                if let Ok(text) = t.render(&b) {
                    return Ok(text);
                }
            }
        }
        Err(ParseError::Unknown(program.to_string()))
    }
}
