use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Wire value of `lang` before language identification has run.
pub const UNASSIGNED: &str = "UNASSIGNED";

/// Stable 128-bit document identifier, rendered as 32 lowercase hex digits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DocId(pub u128);

impl DocId {
    /// Derives the id from the WARC record id and the document URL so that
    /// re-running extraction over the same archive yields the same ids.
    pub fn from_record(record_id: &str, url: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(record_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(url.as_bytes());
        let digest = hasher.finalize();
        let mut bytes = [0u8; 16];
        bytes.copy_from_slice(&digest[..16]);
        DocId(u128::from_be_bytes(bytes))
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DocId({self})")
    }
}

impl FromStr for DocId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 32 {
            return Err(format!("doc id must be 32 hex digits, got {:?}", s));
        }
        u128::from_str_radix(s, 16)
            .map(DocId)
            .map_err(|e| format!("bad doc id {s:?}: {e}"))
    }
}

impl Serialize for DocId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DocId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextNode {
    /// Lowercase name of the HTML element the text came from.
    pub tag: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ImageNode {
    pub url: String,
    /// Digest of the raw downloaded bytes, set once the image is fetched.
    pub sha512: Option<[u8; 64]>,
    pub phash: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
}

impl ImageNode {
    pub fn new(url: impl Into<String>) -> Self {
        ImageNode {
            url: url.into(),
            ..Default::default()
        }
    }

    pub fn sha512_hex(&self) -> Option<String> {
        self.sha512.map(hex::encode)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node {
    Text(TextNode),
    Image(ImageNode),
}

impl Node {
    pub fn text(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Node::Text(TextNode {
            tag: tag.into(),
            text: text.into(),
        })
    }

    pub fn image(url: impl Into<String>) -> Self {
        Node::Image(ImageNode::new(url))
    }

    pub fn as_text(&self) -> Option<&TextNode> {
        match self {
            Node::Text(t) => Some(t),
            Node::Image(_) => None,
        }
    }

    pub fn as_image(&self) -> Option<&ImageNode> {
        match self {
            Node::Image(i) => Some(i),
            Node::Text(_) => None,
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, Node::Text(_))
    }

    pub fn is_image(&self) -> bool {
        matches!(self, Node::Image(_))
    }
}

/// An interleaved text/image document. Stages only ever delete nodes; the
/// relative order of surviving nodes is the DOM depth-first order.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: DocId,
    pub source_url: String,
    /// `None` until language identification has run.
    pub lang: Option<String>,
    pub lang_scores: Vec<(String, f64)>,
    pub nodes: Vec<Node>,
    pub stage_flags: BTreeSet<String>,
    /// Free-form provenance metadata (WARC record id, dump, ...).
    pub meta: Map<String, Value>,
    /// Unknown top-level fields read from a shard, written back untouched.
    pub extra: Map<String, Value>,
}

impl Document {
    pub fn new(id: DocId, source_url: impl Into<String>, nodes: Vec<Node>) -> Self {
        Document {
            id,
            source_url: source_url.into(),
            lang: None,
            lang_scores: Vec::new(),
            nodes,
            stage_flags: BTreeSet::new(),
            meta: Map::new(),
            extra: Map::new(),
        }
    }

    pub fn text_nodes(&self) -> impl Iterator<Item = &TextNode> {
        self.nodes.iter().filter_map(Node::as_text)
    }

    pub fn image_nodes(&self) -> impl Iterator<Item = &ImageNode> {
        self.nodes.iter().filter_map(Node::as_image)
    }

    pub fn text_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_text()).count()
    }

    pub fn image_node_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_image()).count()
    }

    /// Text content of all text nodes joined by newlines.
    pub fn joined_text(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.text_nodes().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&t.text);
        }
        out
    }

    pub fn mark_stage(&mut self, stage: &str) {
        self.stage_flags.insert(stage.to_string());
    }

    /// Serializes the document as one JSONL line (without the trailing newline).
    pub fn to_json_line(&self) -> serde_json::Result<String> {
        serde_json::to_string(&DocumentLine::from(self))
    }

    pub fn from_json_line(line: &str) -> serde_json::Result<Self> {
        let wire: DocumentLine = serde_json::from_str(line)?;
        Ok(wire.into())
    }
}

/// UTF-8 byte length of the document's text nodes joined by single newlines.
pub fn doc_text_bytes(doc: &Document) -> usize {
    let mut total = 0usize;
    let mut count = 0usize;
    for t in doc.text_nodes() {
        total += t.text.len();
        count += 1;
    }
    total + count.saturating_sub(1)
}

// ---------------------------------------------------------------------------
// wire format

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum NodeLine {
    Text {
        tag: String,
        text: String,
    },
    Image {
        url: String,
        #[serde(default, with = "hex_opt")]
        sha512: Option<Vec<u8>>,
        #[serde(default, with = "phash_opt")]
        phash: Option<u64>,
        #[serde(default)]
        width: Option<u32>,
        #[serde(default)]
        height: Option<u32>,
    },
}

#[derive(Serialize, Deserialize)]
struct DocumentLine {
    id: DocId,
    url: String,
    lang: String,
    lang_scores: Vec<(String, f64)>,
    nodes: Vec<NodeLine>,
    #[serde(default)]
    meta: Map<String, Value>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

const STAGES_KEY: &str = "stages";

impl From<&Document> for DocumentLine {
    fn from(doc: &Document) -> Self {
        let nodes = doc
            .nodes
            .iter()
            .map(|n| match n {
                Node::Text(t) => NodeLine::Text {
                    tag: t.tag.clone(),
                    text: t.text.clone(),
                },
                Node::Image(i) => NodeLine::Image {
                    url: i.url.clone(),
                    sha512: i.sha512.map(|d| d.to_vec()),
                    phash: i.phash,
                    width: i.width,
                    height: i.height,
                },
            })
            .collect();
        let mut meta = doc.meta.clone();
        if !doc.stage_flags.is_empty() {
            meta.insert(
                STAGES_KEY.to_string(),
                Value::Array(
                    doc.stage_flags
                        .iter()
                        .map(|s| Value::String(s.clone()))
                        .collect(),
                ),
            );
        }
        DocumentLine {
            id: doc.id,
            url: doc.source_url.clone(),
            lang: doc.lang.clone().unwrap_or_else(|| UNASSIGNED.to_string()),
            lang_scores: doc.lang_scores.clone(),
            nodes,
            meta,
            extra: doc.extra.clone(),
        }
    }
}

impl From<DocumentLine> for Document {
    fn from(line: DocumentLine) -> Self {
        let nodes = line
            .nodes
            .into_iter()
            .map(|n| match n {
                NodeLine::Text { tag, text } => Node::Text(TextNode { tag, text }),
                NodeLine::Image {
                    url,
                    sha512,
                    phash,
                    width,
                    height,
                } => Node::Image(ImageNode {
                    url,
                    sha512: sha512.and_then(|v| <[u8; 64]>::try_from(v.as_slice()).ok()),
                    phash,
                    width,
                    height,
                }),
            })
            .collect();
        let mut meta = line.meta;
        let mut stage_flags = BTreeSet::new();
        let is_flag_list = matches!(
            meta.get(STAGES_KEY),
            Some(Value::Array(items)) if items.iter().all(Value::is_string)
        );
        if is_flag_list {
            if let Some(Value::Array(items)) = meta.remove(STAGES_KEY) {
                stage_flags = items
                    .into_iter()
                    .filter_map(|v| v.as_str().map(str::to_string))
                    .collect();
            }
        }
        Document {
            id: line.id,
            source_url: line.url,
            lang: (line.lang != UNASSIGNED).then_some(line.lang),
            lang_scores: line.lang_scores,
            nodes,
            stage_flags,
            meta,
            extra: line.extra,
        }
    }
}

mod hex_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_str(&hex::encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        match raw {
            None => Ok(None),
            Some(s) => {
                let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
                if bytes.len() != 64 {
                    return Err(serde::de::Error::custom(format!(
                        "sha512 must be 128 hex digits, got {}",
                        s.len()
                    )));
                }
                Ok(Some(bytes))
            }
        }
    }
}

mod phash_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(h) => s.collect_str(&format_args!("{h:016x}")),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        let raw: Option<String> = Option::deserialize(d)?;
        raw.map(|s| {
            if s.len() != 16 {
                return Err(serde::de::Error::custom(format!(
                    "phash must be 16 hex digits, got {s:?}"
                )));
            }
            u64::from_str_radix(&s, 16).map_err(serde::de::Error::custom)
        })
        .transpose()
    }
}
