use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};

/// An HTML `response` record pulled out of a WARC file.
#[derive(Clone, Debug)]
pub struct WarcRecordRef {
    pub record_id: String,
    pub target_uri: String,
    /// The full record block (HTTP status line, headers and body); its length
    /// equals the record's declared `Content-Length`.
    pub payload: Vec<u8>,
    /// Value of the HTTP `Content-Type` header.
    pub content_type: String,
    body_offset: usize,
}

impl WarcRecordRef {
    /// Builds a record from an HTTP response block. Used by the reader and
    /// handy for constructing records in tests.
    pub fn from_http_block(
        record_id: impl Into<String>,
        target_uri: impl Into<String>,
        payload: Vec<u8>,
    ) -> Option<Self> {
        let head = parse_http_head(&payload)?;
        Some(WarcRecordRef {
            record_id: record_id.into(),
            target_uri: target_uri.into(),
            content_type: head.content_type.unwrap_or_default(),
            body_offset: head.body_offset,
            payload,
        })
    }

    /// The HTTP body, i.e. the raw HTML bytes.
    pub fn body(&self) -> &[u8] {
        &self.payload[self.body_offset..]
    }

    /// `charset` parameter of the HTTP content type, if any.
    pub fn declared_charset(&self) -> Option<&str> {
        self.content_type.split(';').skip(1).find_map(|param| {
            let (k, v) = param.split_once('=')?;
            k.trim()
                .eq_ignore_ascii_case("charset")
                .then(|| v.trim().trim_matches('"'))
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WarcReaderStats {
    pub records: u64,
    pub corrupt: u64,
    pub not_response: u64,
    pub not_html: u64,
    pub bad_status: u64,
    pub yielded: u64,
}

/// Opens a WARC file, plain or gzip-compressed (whole-file or per-record
/// members), and streams its HTML response records in file order.
pub fn iterate_records(path: &Path) -> Result<WarcReader<Box<dyn BufRead + Send>>> {
    let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let magic = file.fill_buf().map_err(|e| Error::io(path, e))?;
    let gz = magic.len() >= 2 && magic[0] == 0x1f && magic[1] == 0x8b;
    let inner: Box<dyn BufRead + Send> = if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        Box::new(file)
    };
    Ok(WarcReader::new(inner))
}

pub struct WarcReader<R> {
    input: Input<R>,
    stats: WarcReaderStats,
    done: bool,
}

impl<R: BufRead> WarcReader<R> {
    pub fn new(inner: R) -> Self {
        WarcReader {
            input: Input {
                front: Vec::new(),
                pos: 0,
                inner,
            },
            stats: WarcReaderStats::default(),
            done: false,
        }
    }

    pub fn stats(&self) -> WarcReaderStats {
        self.stats
    }

    fn next_raw(&mut self) -> io::Result<Option<RawRecord>> {
        let mut line = Vec::new();
        // Find the version line, skipping inter-record blank lines. Anything
        // else before it is garbage left by a corrupt record.
        let mut garbage = false;
        loop {
            line.clear();
            if self.input.read_line(&mut line)? == 0 {
                if garbage {
                    self.stats.corrupt += 1;
                }
                return Ok(None);
            }
            if line.starts_with(b"WARC/") {
                break;
            }
            if !is_blank(&line) {
                garbage = true;
            }
        }
        if garbage {
            self.stats.corrupt += 1;
        }

        let mut headers: Vec<(String, String)> = Vec::new();
        loop {
            line.clear();
            if self.input.read_line(&mut line)? == 0 {
                self.stats.corrupt += 1;
                return Ok(None);
            }
            if is_blank(&line) {
                break;
            }
            let text = String::from_utf8_lossy(&line);
            if let Some((k, v)) = text.split_once(':') {
                headers.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
            }
        }
        let header = |name: &str| {
            headers
                .iter()
                .find(|(k, _)| k == name)
                .map(|(_, v)| v.clone())
        };
        let length = match header("content-length").and_then(|v| v.parse::<usize>().ok()) {
            Some(n) => n,
            None => {
                self.stats.corrupt += 1;
                return Ok(Some(RawRecord::Corrupt));
            }
        };

        let mut block = Vec::with_capacity(length.min(1 << 24));
        let got = self.input.read_up_to(length, &mut block)?;
        if got < length {
            self.stats.corrupt += 1;
            self.resync_from(&block, &[]);
            return Ok(Some(RawRecord::Corrupt));
        }

        // Records end with CRLF CRLF. If that is missing the declared length
        // was wrong; look for the next record start inside what we consumed.
        let mut trailer = Vec::new();
        let mut trailer_ok = true;
        for _ in 0..2 {
            let before = trailer.len();
            if self.input.read_line(&mut trailer)? == 0 {
                break;
            }
            if !is_blank(&trailer[before..]) {
                trailer_ok = false;
                break;
            }
        }
        if !trailer_ok {
            if let Some(at) = find_record_start(&block) {
                self.stats.corrupt += 1;
                let mut rest = block[at..].to_vec();
                rest.extend_from_slice(&trailer);
                self.input.unread(&rest);
                return Ok(Some(RawRecord::Corrupt));
            }
            self.input.unread(&trailer);
        }

        Ok(Some(RawRecord::Ok {
            warc_type: header("warc-type").unwrap_or_default(),
            record_id: header("warc-record-id").unwrap_or_default(),
            target_uri: header("warc-target-uri").unwrap_or_default(),
            block,
        }))
    }

    fn resync_from(&mut self, consumed: &[u8], extra: &[u8]) {
        if let Some(at) = find_record_start(consumed) {
            let mut rest = consumed[at..].to_vec();
            rest.extend_from_slice(extra);
            self.input.unread(&rest);
        }
    }
}

impl<R: BufRead> Iterator for WarcReader<R> {
    type Item = Result<WarcRecordRef>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            let raw = match self.next_raw() {
                Ok(Some(raw)) => raw,
                Ok(None) => {
                    self.done = true;
                    return None;
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::RawIo(e)));
                }
            };
            let RawRecord::Ok {
                warc_type,
                record_id,
                target_uri,
                block,
            } = raw
            else {
                continue;
            };
            self.stats.records += 1;
            if !warc_type.eq_ignore_ascii_case("response") {
                self.stats.not_response += 1;
                continue;
            }
            let Some(head) = parse_http_head(&block) else {
                self.stats.corrupt += 1;
                continue;
            };
            if !is_html(head.content_type.as_deref().unwrap_or("")) {
                self.stats.not_html += 1;
                continue;
            }
            if !(200..300).contains(&head.status) {
                self.stats.bad_status += 1;
                continue;
            }
            self.stats.yielded += 1;
            return Some(Ok(WarcRecordRef {
                record_id,
                target_uri,
                content_type: head.content_type.unwrap_or_default(),
                body_offset: head.body_offset,
                payload: block,
            }));
        }
        None
    }
}

enum RawRecord {
    Ok {
        warc_type: String,
        record_id: String,
        target_uri: String,
        block: Vec<u8>,
    },
    Corrupt,
}

struct HttpHead {
    status: u16,
    content_type: Option<String>,
    body_offset: usize,
}

fn parse_http_head(block: &[u8]) -> Option<HttpHead> {
    let (head_end, body_offset) = match find(block, b"\r\n\r\n") {
        Some(i) => (i, i + 4),
        None => {
            let i = find(block, b"\n\n")?;
            (i, i + 2)
        }
    };
    let head = String::from_utf8_lossy(&block[..head_end]);
    let mut lines = head.lines();
    let status_line = lines.next()?;
    if !status_line.starts_with("HTTP/") {
        return None;
    }
    let status = status_line.split_whitespace().nth(1)?.parse().ok()?;
    let content_type = lines.find_map(|l| {
        let (k, v) = l.split_once(':')?;
        k.trim()
            .eq_ignore_ascii_case("content-type")
            .then(|| v.trim().to_string())
    });
    Some(HttpHead {
        status,
        content_type,
        body_offset,
    })
}

fn is_html(content_type: &str) -> bool {
    let mime = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    mime == "text/html" || mime == "application/xhtml+xml"
}

fn is_blank(line: &[u8]) -> bool {
    line == b"\r\n" || line == b"\n"
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Offset of the first `WARC/1.` that starts a line, skipping offset 0.
fn find_record_start(bytes: &[u8]) -> Option<usize> {
    let needle = b"\nWARC/1.";
    find(bytes, needle).map(|i| i + 1)
}

/// Buffered input with push-back, so that bytes consumed past a corrupt
/// record boundary can be re-read.
struct Input<R> {
    front: Vec<u8>,
    pos: usize,
    inner: R,
}

impl<R: BufRead> Input<R> {
    fn read_line(&mut self, out: &mut Vec<u8>) -> io::Result<usize> {
        let mut n = 0;
        if self.pos < self.front.len() {
            let rest = &self.front[self.pos..];
            if let Some(i) = rest.iter().position(|&b| b == b'\n') {
                out.extend_from_slice(&rest[..=i]);
                self.pos += i + 1;
                return Ok(i + 1);
            }
            out.extend_from_slice(rest);
            n = rest.len();
            self.front.clear();
            self.pos = 0;
        }
        Ok(n + self.inner.read_until(b'\n', out)?)
    }

    fn read_up_to(&mut self, len: usize, out: &mut Vec<u8>) -> io::Result<usize> {
        let mut n = 0;
        if self.pos < self.front.len() {
            let take = (self.front.len() - self.pos).min(len);
            out.extend_from_slice(&self.front[self.pos..self.pos + take]);
            self.pos += take;
            n = take;
        }
        if n < len {
            n += (&mut self.inner).take((len - n) as u64).read_to_end(out)?;
        }
        Ok(n)
    }

    fn unread(&mut self, bytes: &[u8]) {
        let mut front = bytes.to_vec();
        front.extend_from_slice(&self.front[self.pos..]);
        self.front = front;
        self.pos = 0;
    }
}
