//! Lenient HTML → markdown conversion for judge input.
//!
//! Handles the structural subset that matters for factuality judging:
//! headings, paragraphs, lists (nested), tables, links, emphasis, code, and
//! blockquotes. Scripts, styles, and navigation boilerplate are stripped.
//! Input that contains no markup passes through with minimal whitespace
//! normalization, which makes the conversion idempotent on its own output.

use std::sync::LazyLock;

use regex::Regex;

static TAG_START: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[A-Za-z/!?]").unwrap());

/// Elements whose entire content is dropped.
const SKIP_TAGS: [&str; 13] = [
    "script", "style", "noscript", "nav", "header", "footer", "aside", "iframe", "svg", "form",
    "head", "button", "select",
];

const VOID_TAGS: [&str; 13] = [
    "br", "hr", "img", "meta", "link", "input", "source", "col", "embed", "area", "base", "track",
    "wbr",
];

pub fn to_markdown(html: &str) -> String {
    if !TAG_START.is_match(html) {
        return normalize_plain(html);
    }
    Converter::default().run(html)
}

/// Line-preserving cleanup for text that is already plain: normalize line
/// endings, drop trailing space, collapse blank-line runs.
fn normalize_plain(text: &str) -> String {
    let normalized = text.replace("\r\n", "\n");
    let mut collapsed: Vec<&str> = Vec::new();
    let mut blank_run = false;
    for line in normalized.lines().map(str::trim_end) {
        if line.is_empty() {
            if !blank_run && !collapsed.is_empty() {
                collapsed.push("");
            }
            blank_run = true;
        } else {
            collapsed.push(line);
            blank_run = false;
        }
    }
    while collapsed.last() == Some(&"") {
        collapsed.pop();
    }
    collapsed.join("\n")
}

// ── Tokenizer ──────────────────────────────────────────────────────────

#[derive(Debug)]
enum Event {
    Text(String),
    Open {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Close {
        name: String,
    },
}

fn tokenize(html: &str) -> Vec<Event> {
    let bytes = html.as_bytes();
    let mut events = Vec::new();
    let mut i = 0usize;
    let mut text_start = 0usize;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        match next {
            Some(b'!') => {
                flush_text(html, text_start, i, &mut events);
                i = if html[i..].starts_with("<!--") {
                    html[i..]
                        .find("-->")
                        .map(|end| i + end + 3)
                        .unwrap_or(bytes.len())
                } else {
                    html[i..]
                        .find('>')
                        .map(|end| i + end + 1)
                        .unwrap_or(bytes.len())
                };
                text_start = i;
            }
            Some(b'?') => {
                flush_text(html, text_start, i, &mut events);
                i = html[i..]
                    .find('>')
                    .map(|end| i + end + 1)
                    .unwrap_or(bytes.len());
                text_start = i;
            }
            Some(b'/') => {
                flush_text(html, text_start, i, &mut events);
                let end = html[i..].find('>').map(|e| i + e).unwrap_or(bytes.len());
                let name = html[i + 2..end.min(bytes.len())]
                    .trim()
                    .to_ascii_lowercase();
                if !name.is_empty() {
                    events.push(Event::Close { name });
                }
                i = (end + 1).min(bytes.len());
                text_start = i;
            }
            Some(c) if c.is_ascii_alphabetic() => {
                flush_text(html, text_start, i, &mut events);
                let (event, consumed) = parse_tag(html, i);
                if let Some(event) = event {
                    events.push(event);
                }
                i = consumed;
                text_start = i;
            }
            _ => {
                // Literal '<' in text.
                i += 1;
            }
        }
    }
    flush_text(html, text_start, bytes.len(), &mut events);
    events
}

fn flush_text(html: &str, start: usize, end: usize, events: &mut Vec<Event>) {
    if end > start {
        events.push(Event::Text(html[start..end].to_string()));
    }
}

/// Parse an opening tag at `start` (which holds `<`). Returns the event(s)
/// and the index just past the closing `>`. Void and self-closed elements
/// produce an Open immediately followed by a Close.
fn parse_tag(html: &str, start: usize) -> (Option<Event>, usize) {
    let bytes = html.as_bytes();
    let mut i = start + 1;
    let name_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
        i += 1;
    }
    let name = html[name_start..i].to_ascii_lowercase();

    let mut attrs = Vec::new();
    let mut self_closing = false;
    while i < bytes.len() && bytes[i] != b'>' {
        if bytes[i] == b'/' && bytes.get(i + 1) == Some(&b'>') {
            self_closing = true;
            i += 1;
            break;
        }
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // Attribute name.
        let attr_start = i;
        while i < bytes.len()
            && !bytes[i].is_ascii_whitespace()
            && bytes[i] != b'='
            && bytes[i] != b'>'
            && bytes[i] != b'/'
        {
            i += 1;
        }
        let attr_name = html[attr_start..i].to_ascii_lowercase();
        let mut value = String::new();
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'=' {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let quote = bytes[i];
                i += 1;
                let value_start = i;
                while i < bytes.len() && bytes[i] != quote {
                    i += 1;
                }
                value = html[value_start..i].to_string();
                i = (i + 1).min(bytes.len());
            } else {
                let value_start = i;
                while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                    i += 1;
                }
                value = html[value_start..i].to_string();
            }
        }
        if !attr_name.is_empty() {
            attrs.push((attr_name, value));
        }
    }
    let end = (i + 1).min(bytes.len());
    if name.is_empty() {
        return (None, end);
    }
    if self_closing || VOID_TAGS.contains(&name.as_str()) {
        // Represent as open; the converter treats void tags atomically.
        return (Some(Event::Open { name, attrs }), end);
    }
    (Some(Event::Open { name, attrs }), end)
}

// ── Entities ───────────────────────────────────────────────────────────

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        let end = rest[..rest.len().min(12)].find(';');
        match end {
            Some(end) => {
                let entity = &rest[1..end];
                let decoded = match entity {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some(' '),
                    _ => {
                        if let Some(num) = entity.strip_prefix("#x").or(entity.strip_prefix("#X")) {
                            u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
                        } else if let Some(num) = entity.strip_prefix('#') {
                            num.parse::<u32>().ok().and_then(char::from_u32)
                        } else {
                            None
                        }
                    }
                };
                match decoded {
                    Some(c) => {
                        out.push(c);
                        rest = &rest[end + 1..];
                    }
                    None => {
                        out.push('&');
                        rest = &rest[1..];
                    }
                }
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

// ── Converter ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Normal,
    ListItem,
    TableRow,
}

#[derive(Debug, Clone)]
struct ListCtx {
    ordered: bool,
    index: usize,
}

#[derive(Debug, Default)]
struct TableCtx {
    rows: Vec<Vec<String>>,
    current_row: Option<Vec<String>>,
    header_emitted: bool,
}

#[derive(Default)]
struct Converter {
    blocks: Vec<(BlockKind, String)>,
    inline: String,
    pending_space: bool,
    heading: Option<usize>,
    list_stack: Vec<ListCtx>,
    link_stack: Vec<(usize, Option<String>)>,
    skip_stack: Vec<String>,
    quote_depth: usize,
    pre: bool,
    pre_buf: String,
    table: Option<TableCtx>,
    in_cell: bool,
}

impl Converter {
    fn run(mut self, html: &str) -> String {
        for event in tokenize(html) {
            match event {
                Event::Text(text) => self.on_text(&text),
                Event::Open { name, attrs } => self.on_open(&name, &attrs),
                Event::Close { name } => self.on_close(&name),
            }
        }
        self.flush_block();
        self.render()
    }

    fn skipping(&self) -> bool {
        !self.skip_stack.is_empty()
    }

    /// Emit a deferred inter-word space before opening inline markup.
    fn resolve_pending_space(&mut self) {
        if self.pending_space && !self.inline.is_empty() {
            self.inline.push(' ');
        }
        self.pending_space = false;
    }

    fn on_text(&mut self, text: &str) {
        if self.skipping() {
            return;
        }
        if self.pre {
            self.pre_buf.push_str(text);
            return;
        }
        let decoded = decode_entities(text);
        // Blank lines in raw text are block separators; other whitespace
        // collapses to single spaces.
        let mut first = true;
        for segment in decoded.split("\n\n") {
            if !first {
                self.flush_block();
            }
            first = false;
            for c in segment.chars() {
                if c.is_whitespace() {
                    self.pending_space = true;
                } else {
                    if self.pending_space && !self.inline.is_empty() {
                        self.inline.push(' ');
                    }
                    self.pending_space = false;
                    self.inline.push(c);
                }
            }
        }
    }

    fn on_open(&mut self, name: &str, attrs: &[(String, String)]) {
        if SKIP_TAGS.contains(&name) {
            self.flush_block();
            self.skip_stack.push(name.to_string());
            return;
        }
        if self.skipping() {
            return;
        }
        match name {
            "br" => self.inline.push('\n'),
            "hr" => {
                self.flush_block();
                self.blocks.push((BlockKind::Normal, "---".to_string()));
            }
            "img" | "meta" | "link" | "input" | "source" | "col" | "embed" | "area" | "base"
            | "track" | "wbr" => {}
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
                self.flush_block();
                self.heading = Some(name[1..].parse().unwrap_or(1));
            }
            "p" | "div" | "section" | "article" | "main" | "figure" | "figcaption" | "details"
            | "summary" | "dl" | "dt" | "dd" => self.flush_block(),
            "blockquote" => {
                self.flush_block();
                self.quote_depth += 1;
            }
            "pre" => {
                self.flush_block();
                self.pre = true;
                self.pre_buf.clear();
            }
            "code" if !self.pre => {
                self.resolve_pending_space();
                self.inline.push('`');
            }
            "strong" | "b" => {
                self.resolve_pending_space();
                self.inline.push_str("**");
            }
            "em" | "i" => {
                self.resolve_pending_space();
                self.inline.push('*');
            }
            "a" => {
                let href = attrs
                    .iter()
                    .find(|(k, _)| k == "href")
                    .map(|(_, v)| v.trim().to_string())
                    .filter(|v| !v.is_empty() && !v.starts_with("javascript:"));
                self.resolve_pending_space();
                self.link_stack.push((self.inline.len(), href));
            }
            "ul" | "ol" => {
                self.flush_block();
                self.list_stack.push(ListCtx {
                    ordered: name == "ol",
                    index: 0,
                });
            }
            "li" => self.flush_block(),
            "table" => {
                self.flush_block();
                self.table = Some(TableCtx::default());
            }
            "tr" => {
                if let Some(table) = self.table.as_mut() {
                    table.current_row = Some(Vec::new());
                }
            }
            "td" | "th" => {
                self.inline.clear();
                self.pending_space = false;
                self.in_cell = true;
            }
            _ => {}
        }
    }

    fn on_close(&mut self, name: &str) {
        if self.skipping() {
            if self.skip_stack.last().map(String::as_str) == Some(name) {
                self.skip_stack.pop();
            }
            return;
        }
        match name {
            "h1" | "h2" | "h3" | "h4" | "h5" | "h6" | "p" | "div" | "section" | "article"
            | "main" | "figure" | "figcaption" | "details" | "summary" | "dl" | "dt" | "dd" => {
                self.flush_block()
            }
            "blockquote" => {
                self.flush_block();
                self.quote_depth = self.quote_depth.saturating_sub(1);
            }
            "pre" => {
                self.pre = false;
                let body = self.pre_buf.trim_matches('\n').trim_end().to_string();
                self.blocks
                    .push((BlockKind::Normal, format!("```\n{body}\n```")));
                self.pre_buf.clear();
            }
            "code" if !self.pre => self.inline.push('`'),
            "strong" | "b" => self.inline.push_str("**"),
            "em" | "i" => self.inline.push('*'),
            "a" => {
                if let Some((start, Some(href))) = self.link_stack.pop() {
                    let text = self.inline[start..].trim().to_string();
                    let label = if text.is_empty() { href.clone() } else { text };
                    self.inline.truncate(start);
                    self.inline.push_str(&format!("[{label}]({href})"));
                }
            }
            "ul" | "ol" => {
                self.flush_block();
                self.list_stack.pop();
            }
            "li" => self.flush_block(),
            "td" | "th" => {
                if self.in_cell {
                    let cell = std::mem::take(&mut self.inline).trim().to_string();
                    self.pending_space = false;
                    self.in_cell = false;
                    if let Some(table) = self.table.as_mut() {
                        if let Some(row) = table.current_row.as_mut() {
                            row.push(cell);
                        }
                    }
                }
            }
            "tr" => {
                if let Some(table) = self.table.as_mut() {
                    if let Some(row) = table.current_row.take() {
                        if !row.iter().all(String::is_empty) {
                            table.rows.push(row);
                        }
                    }
                }
            }
            "table" => {
                if let Some(table) = self.table.take() {
                    self.emit_table(table);
                }
            }
            _ => {}
        }
    }

    fn emit_table(&mut self, table: TableCtx) {
        let mut first = true;
        for row in table.rows {
            let line = format!("| {} |", row.join(" | "));
            self.blocks.push((BlockKind::TableRow, line));
            if first {
                let sep = format!("|{}", " --- |".repeat(row.len()));
                self.blocks.push((BlockKind::TableRow, sep));
                first = false;
            }
        }
        let _ = table.header_emitted;
    }

    fn flush_block(&mut self) {
        let text = std::mem::take(&mut self.inline);
        self.pending_space = false;
        let text = text.trim();
        if text.is_empty() {
            self.heading.take();
            return;
        }
        let depth = self.list_stack.len();
        let mut line = if let Some(level) = self.heading.take() {
            format!("{} {text}", "#".repeat(level))
        } else if let Some(ctx) = self.list_stack.last_mut() {
            let indent = "  ".repeat(depth.saturating_sub(1));
            if ctx.ordered {
                ctx.index += 1;
                let index = ctx.index;
                format!("{indent}{index}. {text}")
            } else {
                format!("{indent}- {text}")
            }
        } else {
            text.to_string()
        };
        if self.quote_depth > 0 {
            let prefix = "> ".repeat(self.quote_depth);
            line = line
                .lines()
                .map(|l| format!("{prefix}{l}"))
                .collect::<Vec<_>>()
                .join("\n");
        }
        let kind = if self.list_stack.is_empty() {
            BlockKind::Normal
        } else {
            BlockKind::ListItem
        };
        self.blocks.push((kind, line));
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let mut previous: Option<BlockKind> = None;
        for (kind, text) in &self.blocks {
            if previous.is_some() {
                let tight = matches!(
                    (previous, kind),
                    (Some(BlockKind::ListItem), BlockKind::ListItem)
                        | (Some(BlockKind::TableRow), BlockKind::TableRow)
                );
                out.push_str(if tight { "\n" } else { "\n\n" });
            }
            out.push_str(text);
            previous = Some(*kind);
        }
        out
    }
}
