use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clarify_core::corpus::{parse_corpus, parse_corpus_lenient, Corpus, CorpusError};
use clarify_core::fixtures;
use clarify_core::recipe::DecisionLog;

use crate::Failure;

/// Directory searched for `<name>.jsonl` when a corpus argument is not a path.
pub const CORPUS_DIR_ENV: &str = "CLARIFY_CORPUS_DIR";

const GOLDEN: &str = "golden";

/// Where corpus and session names are looked up.
///
/// A name resolves to, in order: an existing file, `<corpus dir>/<name>.jsonl`,
/// then a bundled fixture (`scare_frag` corpus, `golden` session).
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub corpus_dir: Option<PathBuf>,
}

impl Context {
    pub fn from_env() -> Self {
        Context {
            corpus_dir: std::env::var_os(CORPUS_DIR_ENV).map(PathBuf::from),
        }
    }

    fn corpus_path(&self, name: &str) -> Option<PathBuf> {
        let direct = Path::new(name);
        if direct.is_file() {
            return Some(direct.to_path_buf());
        }
        let in_dir = self.corpus_dir.as_ref()?.join(format!("{name}.jsonl"));
        in_dir.is_file().then_some(in_dir)
    }

    fn load(
        &self,
        name: &str,
        parse: fn(&str, BufReader<File>) -> Result<Corpus, CorpusError>,
    ) -> Result<Corpus, Failure> {
        if let Some(path) = self.corpus_path(name) {
            let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string();
            let file = File::open(&path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
            return parse(&id, BufReader::new(file)).map_err(|e| Failure(format!("{}: {e}", path.display())));
        }
        if name == fixtures::SCARE_FRAGMENT_ID {
            return Ok(fixtures::scare_fragment());
        }
        Err(Failure(format!("corpus {name:?} not found")))
    }

    pub fn corpus(&self, name: &str) -> Result<Corpus, Failure> {
        self.load(name, parse_corpus)
    }

    /// Syntax-checked only, so invariant violations can be listed.
    pub fn corpus_lenient(&self, name: &str) -> Result<Corpus, Failure> {
        self.load(name, parse_corpus_lenient)
    }

    pub fn session_log(&self, name: &str) -> Result<DecisionLog, Failure> {
        let path = Path::new(name);
        if path.is_file() {
            let text = std::fs::read_to_string(path).map_err(|e| Failure(format!("{name}: {e}")))?;
            return DecisionLog::from_session_file(&text).map_err(|e| Failure(format!("{name}: {e}")));
        }
        if name == GOLDEN {
            return Ok(fixtures::golden_log());
        }
        Err(Failure(format!("session {name:?} not found")))
    }
}
