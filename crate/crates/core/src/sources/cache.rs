//! Content-addressed source cache.
//!
//! Layout: one `index.tsv` with `ref<TAB>hash<TAB>fetched_at` lines plus one
//! `<hash>.md` file per distinct document body. Failed resolutions are
//! cached too, with a `!unreachable` / `!nonhtml` marker in the hash column,
//! so offline runs see deterministic statuses instead of cache misses.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{SourceDocument, SourceError, SourceStatus};

const INDEX_FILE: &str = "index.tsv";
const UNREACHABLE_MARK: &str = "!unreachable";
const NONHTML_MARK: &str = "!nonhtml";

#[derive(Debug, Clone)]
struct IndexEntry {
    hash: String,
    fetched_at: String,
}

pub struct SourceCache {
    dir: PathBuf,
    state: Mutex<HashMap<String, IndexEntry>>,
}

impl SourceCache {
    /// Open (creating if needed) a cache directory and load its index.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, SourceError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|source| SourceError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut entries = HashMap::new();
        let index_path = dir.join(INDEX_FILE);
        if index_path.exists() {
            let raw = std::fs::read_to_string(&index_path).map_err(|source| SourceError::Io {
                path: index_path.display().to_string(),
                source,
            })?;
            for (idx, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let mut fields = line.splitn(3, '\t');
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(reference), Some(hash), Some(fetched_at)) => {
                        entries.insert(
                            reference.to_string(),
                            IndexEntry {
                                hash: hash.to_string(),
                                fetched_at: fetched_at.to_string(),
                            },
                        );
                    }
                    _ => return Err(SourceError::BadIndexLine { line: idx + 1 }),
                }
            }
        }
        Ok(Self {
            dir,
            state: Mutex::new(entries),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, source_ref: &str) -> bool {
        self.state
            .lock()
            .expect("cache poisoned")
            .contains_key(source_ref)
    }

    /// Cached document for a reference, if any. Never touches the network.
    pub fn get(&self, source_ref: &str) -> Option<SourceDocument> {
        let entry = self
            .state
            .lock()
            .expect("cache poisoned")
            .get(source_ref)
            .cloned()?;
        match entry.hash.as_str() {
            UNREACHABLE_MARK => Some(SourceDocument {
                source_ref: source_ref.to_string(),
                status: SourceStatus::Unreachable,
                markdown: None,
                content_hash: None,
                fetched_at: entry.fetched_at,
            }),
            NONHTML_MARK => Some(SourceDocument {
                source_ref: source_ref.to_string(),
                status: SourceStatus::NonHtml,
                markdown: None,
                content_hash: None,
                fetched_at: entry.fetched_at,
            }),
            hash => {
                let markdown = std::fs::read_to_string(self.dir.join(format!("{hash}.md"))).ok()?;
                Some(SourceDocument {
                    source_ref: source_ref.to_string(),
                    status: SourceStatus::Resolved,
                    markdown: Some(markdown),
                    content_hash: Some(hash.to_string()),
                    fetched_at: entry.fetched_at,
                })
            }
        }
    }

    /// Insert a document. First writer wins per key; later puts for the same
    /// reference are no-ops so concurrent fetchers cannot fight.
    pub fn put(&self, doc: &SourceDocument) -> Result<(), SourceError> {
        let hash_field = match doc.status {
            SourceStatus::Resolved => doc.content_hash.clone().unwrap_or_else(|| {
                crate::util::sha256_hex(doc.markdown.as_deref().unwrap_or("").as_bytes())
            }),
            SourceStatus::Unreachable => UNREACHABLE_MARK.to_string(),
            SourceStatus::NonHtml => NONHTML_MARK.to_string(),
        };

        let mut state = self.state.lock().expect("cache poisoned");
        if state.contains_key(&doc.source_ref) {
            return Ok(());
        }
        if doc.status == SourceStatus::Resolved {
            let content_path = self.dir.join(format!("{hash_field}.md"));
            if !content_path.exists() {
                std::fs::write(&content_path, doc.markdown.as_deref().unwrap_or("")).map_err(
                    |source| SourceError::Io {
                        path: content_path.display().to_string(),
                        source,
                    },
                )?;
            }
        }
        let index_path = self.dir.join(INDEX_FILE);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(|source| SourceError::Io {
                path: index_path.display().to_string(),
                source,
            })?;
        writeln!(
            file,
            "{}\t{}\t{}",
            doc.source_ref, hash_field, doc.fetched_at
        )
        .map_err(|source| SourceError::Io {
            path: index_path.display().to_string(),
            source,
        })?;
        state.insert(
            doc.source_ref.clone(),
            IndexEntry {
                hash: hash_field,
                fetched_at: doc.fetched_at.clone(),
            },
        );
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolved(reference: &str, body: &str) -> SourceDocument {
        SourceDocument {
            source_ref: reference.to_string(),
            status: SourceStatus::Resolved,
            markdown: Some(body.to_string()),
            content_hash: Some(crate::util::sha256_hex(body.as_bytes())),
            fetched_at: "2025-01-01T00:00:00Z".to_string(),
        }
    }

    #[test]
    fn warm_cache_round_trips_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SourceCache::open(dir.path()).unwrap();
        let doc = resolved("https://x.test/page", "# Page\n\nbody text");
        cache.put(&doc).unwrap();

        let first = cache.get("https://x.test/page").unwrap();
        assert_eq!(first, doc);

        // Re-open from disk: same bytes.
        let reopened = SourceCache::open(dir.path()).unwrap();
        let second = reopened.get("https://x.test/page").unwrap();
        assert_eq!(second, doc);
    }

    #[test]
    fn failures_are_cached_with_markers() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SourceCache::open(dir.path()).unwrap();
        cache
            .put(&SourceDocument {
                source_ref: "https://dead.test/404".to_string(),
                status: SourceStatus::Unreachable,
                markdown: None,
                content_hash: None,
                fetched_at: "t".to_string(),
            })
            .unwrap();
        let doc = cache.get("https://dead.test/404").unwrap();
        assert_eq!(doc.status, SourceStatus::Unreachable);
        assert!(doc.markdown.is_none());
    }

    #[test]
    fn first_writer_wins() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SourceCache::open(dir.path()).unwrap();
        cache.put(&resolved("k", "original")).unwrap();
        cache.put(&resolved("k", "changed")).unwrap();
        assert_eq!(cache.get("k").unwrap().markdown.unwrap(), "original");
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn identical_content_shares_one_file() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SourceCache::open(dir.path()).unwrap();
        cache.put(&resolved("a", "same body")).unwrap();
        cache.put(&resolved("b", "same body")).unwrap();
        let md_files = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().map(|x| x == "md") == Some(true))
            .count();
        assert_eq!(md_files, 1);
        assert_eq!(cache.len(), 2);
    }
}
