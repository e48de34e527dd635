use std::collections::BTreeSet;
use std::sync::LazyLock;

use ego_tree::NodeRef;
use regex::bytes::Regex;
use scraper::{Html, Node as HtmlNode};
use url::Url;

use super::WarcRecordRef;
use crate::corpus::{DocId, Document, Node};

/// Which elements become text nodes, which become image nodes and which
/// subtrees are ignored entirely.
#[derive(Clone, Debug)]
pub struct TagPolicy {
    pub text_allow: BTreeSet<String>,
    pub image_tag: String,
    pub drop_subtrees: BTreeSet<String>,
}

impl Default for TagPolicy {
    fn default() -> Self {
        let text_allow = [
            "p", "h1", "h2", "h3", "h4", "h5", "h6", "title", "description", "ul", "ol",
            "aside", "dl", "dd", "dt",
        ];
        // script/style/template never render; table content is noise.
        let drop_subtrees = ["table", "script", "style", "template", "noscript"];
        TagPolicy {
            text_allow: text_allow.iter().map(|s| s.to_string()).collect(),
            image_tag: "img".to_string(),
            drop_subtrees: drop_subtrees.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// Document-level size gates applied during assembly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExtractGates {
    /// Minimum raw HTML payload size in bytes.
    pub min_doc_bytes: usize,
    pub min_text_nodes: usize,
    pub max_image_nodes: usize,
}

impl Default for ExtractGates {
    fn default() -> Self {
        ExtractGates {
            min_doc_bytes: 500,
            min_text_nodes: 3,
            max_image_nodes: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractReject {
    TooSmall,
    TooFewTextNodes,
    TooManyImages,
}

impl ExtractReject {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractReject::TooSmall => "too_small",
            ExtractReject::TooFewTextNodes => "too_few_text_nodes",
            ExtractReject::TooManyImages => "too_many_images",
        }
    }
}

/// Resolves an `<img src>` value against the document URL. Only http(s)
/// results are valid; `data:`, `javascript:` and friends are rejected.
pub fn resolve_url(base: &str, src: &str) -> Option<Url> {
    let base = Url::parse(base).ok()?;
    let src = src.trim_matches(|c: char| c.is_ascii_whitespace());
    if src.is_empty() {
        return None;
    }
    let url = base.join(src).ok()?;
    matches!(url.scheme(), "http" | "https").then_some(url)
}

/// Walks the DOM of an HTML response depth-first and assembles an
/// interleaved document, or says which gate rejected it.
pub fn extract_document(
    record: &WarcRecordRef,
    policy: &TagPolicy,
    gates: &ExtractGates,
) -> Result<Document, ExtractReject> {
    let body = record.body();
    if body.len() < gates.min_doc_bytes {
        return Err(ExtractReject::TooSmall);
    }
    let html = decode_html(body, record.declared_charset());
    let dom = Html::parse_document(&html);

    let mut nodes = Vec::new();
    // (node, inside an allow-listed text element)
    let mut stack: Vec<(NodeRef<'_, HtmlNode>, bool)> = vec![(dom.tree.root(), false)];
    while let Some((node, inside_text)) = stack.pop() {
        let mut child_inside = inside_text;
        if let HtmlNode::Element(el) = node.value() {
            let name = el.name();
            if policy.drop_subtrees.contains(name) {
                continue;
            }
            if name == policy.image_tag {
                if let Some(url) = el.attr("src").and_then(|s| resolve_url(&record.target_uri, s)) {
                    nodes.push(Node::image(url.as_str()));
                }
            } else if name == "meta" && policy.text_allow.contains("description") {
                let is_description = el
                    .attr("name")
                    .is_some_and(|n| n.eq_ignore_ascii_case("description"));
                if is_description {
                    let text = normalize_ws(el.attr("content").unwrap_or(""));
                    if !text.is_empty() {
                        nodes.push(Node::text("description", text));
                    }
                }
            } else if !inside_text && policy.text_allow.contains(name) {
                let text = normalize_ws(&collect_text(node, policy));
                if !text.is_empty() {
                    nodes.push(Node::text(name, text));
                }
                child_inside = true;
            }
        }
        for child in node.children().rev() {
            stack.push((child, child_inside));
        }
    }

    let text_nodes = nodes.iter().filter(|n| n.is_text()).count();
    let image_nodes = nodes.len() - text_nodes;
    if text_nodes < gates.min_text_nodes {
        return Err(ExtractReject::TooFewTextNodes);
    }
    if image_nodes > gates.max_image_nodes {
        return Err(ExtractReject::TooManyImages);
    }

    let mut doc = Document::new(
        DocId::from_record(&record.record_id, &record.target_uri),
        record.target_uri.clone(),
        nodes,
    );
    doc.meta.insert(
        "warc_record_id".to_string(),
        serde_json::Value::String(record.record_id.clone()),
    );
    Ok(doc)
}

/// Elements whose boundaries separate words when rendered.
const BREAKING: &[&str] = &[
    "address", "article", "blockquote", "br", "dd", "div", "dl", "dt", "figcaption", "footer",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p", "section",
    "td", "th", "title", "tr", "ul",
];

fn collect_text(root: NodeRef<'_, HtmlNode>, policy: &TagPolicy) -> String {
    enum Step<'a> {
        Enter(NodeRef<'a, HtmlNode>),
        Leave(bool),
    }
    let mut out = String::new();
    let mut stack = vec![Step::Enter(root)];
    while let Some(step) = stack.pop() {
        match step {
            Step::Leave(breaking) => {
                if breaking {
                    out.push(' ');
                }
            }
            Step::Enter(node) => match node.value() {
                HtmlNode::Text(t) => out.push_str(t),
                HtmlNode::Element(el) => {
                    if policy.drop_subtrees.contains(el.name()) {
                        continue;
                    }
                    let breaking = BREAKING.contains(&el.name());
                    if breaking {
                        out.push(' ');
                    }
                    stack.push(Step::Leave(breaking));
                    for child in node.children().rev() {
                        stack.push(Step::Enter(child));
                    }
                }
                _ => {}
            },
        }
    }
    out
}

fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

static META_CHARSET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?i)<meta[^>]+charset\s*=\s*["']?\s*([a-zA-Z0-9_\-:.]+)"#).unwrap()
});

fn decode_html(body: &[u8], declared: Option<&str>) -> String {
    let sniffed = || {
        let head = &body[..body.len().min(1024)];
        META_CHARSET
            .captures(head)
            .and_then(|c| encoding_rs::Encoding::for_label(&c[1]))
    };
    let encoding = declared
        .and_then(|label| encoding_rs::Encoding::for_label(label.as_bytes()))
        .or_else(sniffed)
        .unwrap_or(encoding_rs::UTF_8);
    let (text, _, _) = encoding.decode(body);
    text.into_owned()
}
