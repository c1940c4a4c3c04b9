//! External tool invocation with a content-addressed transcript cache.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use ald_engine::Budget;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use wait_timeout::ChildExt;

/// Tool id served in-process by the logic engine unless the manifest
/// defines a tool of the same name.
pub const ENGINE_TOOL: &str = "engine";
pub const TIMEOUT_EXIT_CODE: i32 = -1;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
    #[error("failed to run tool `{tool}`: {message}")]
    SpawnFailure { tool: String, message: String },
    #[error("bad tool manifest: {0}")]
    BadManifest(String),
    #[error("tool `{tool}` produced different output for an identical request")]
    Nondeterministic { tool: String },
    #[error("cache i/o error at {path}: {source}")]
    Cache { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    #[default]
    File,
    Stdin,
}

fn default_timeout() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub command: Vec<String>,
    #[serde(default)]
    pub input_mode: InputMode,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version_command: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scrub: Vec<String>,
    /// Reserved for remote tools; not supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolManifest {
    pub tools: BTreeMap<String, ToolSpec>,
    /// Directory that relative commands and the working directory resolve against.
    #[serde(default)]
    pub base_dir: PathBuf,
}

impl ToolManifest {
    pub fn load(path: &Path) -> Result<Self, ToolError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ToolError::BadManifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = std::fs::canonicalize(&base).unwrap_or(base);
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base_dir: PathBuf) -> Result<Self, ToolError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            tools: BTreeMap<String, ToolSpec>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| ToolError::BadManifest(e.to_string()))?;
        for (id, spec) in &raw.tools {
            if spec.command.is_empty() {
                return Err(ToolError::BadManifest(format!("tool `{id}` has an empty command")));
            }
            if spec.endpoint.is_some() {
                return Err(ToolError::BadManifest(format!("tool `{id}`: remote endpoints are not supported")));
            }
            if spec.version_command.as_ref().is_some_and(Vec::is_empty) {
                return Err(ToolError::BadManifest(format!("tool `{id}` has an empty version_command")));
            }
        }
        Ok(ToolManifest { tools: raw.tools, base_dir })
    }

    pub fn has_tool(&self, id: &str) -> bool {
        self.tools.contains_key(id) || id == ENGINE_TOOL
    }

    fn program_path(&self, program: &str) -> PathBuf {
        let p = Path::new(program);
        if p.is_relative() && program.contains('/') {
            self.base_dir.join(p)
        } else {
            p.to_path_buf()
        }
    }

    fn command(&self, argv: &[String], scrub: &[String]) -> Command {
        let mut cmd = Command::new(self.program_path(&argv[0]));
        cmd.args(&argv[1..]);
        if !self.base_dir.as_os_str().is_empty() {
            cmd.current_dir(&self.base_dir);
        }
        for var in scrub {
            cmd.env_remove(var);
        }
        cmd
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

impl Transcript {
    pub fn timed_out(&self) -> bool {
        self.exit_code == TIMEOUT_EXIT_CODE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolRequest {
    pub tool_id: String,
    pub input: String,
    /// Name given to the input file handed to the tool.
    pub file_name: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheKey(pub [u8; 32]);

impl CacheKey {
    pub fn new(request: &ToolRequest, tool_version: &str) -> Self {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(request.tool_id.as_bytes());
        field(tool_version.as_bytes());
        field(&Sha256::digest(request.input.as_bytes()));
        field(request.file_name.as_bytes());
        field(&(request.options.len() as u64).to_le_bytes());
        for opt in &request.options {
            field(opt.as_bytes());
        }
        CacheKey(h.finalize().into())
    }

    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    tool_id: String,
    tool_version: String,
    transcript: Transcript,
}

/// Transcript store under `<dir>/<hex key>.json`. The first completed write
/// for a key wins; a later write with different content is an error.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.hex()))
    }

    pub fn get(&self, key: &CacheKey) -> Option<Transcript> {
        let bytes = std::fs::read(self.path(key)).ok()?;
        serde_json::from_slice::<CacheEntry>(&bytes).ok().map(|e| e.transcript)
    }

    pub fn put(&self, key: &CacheKey, tool_id: &str, tool_version: &str, transcript: &Transcript) -> Result<(), ToolError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ToolError::Cache { path, source }
        };
        std::fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let path = self.path(key);
        let entry = CacheEntry {
            tool_id: tool_id.to_string(),
            tool_version: tool_version.to_string(),
            transcript: transcript.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        bytes.push(b'\n');

        let existing = std::fs::read(&path);
        match existing {
            Ok(old) => match serde_json::from_slice::<CacheEntry>(&old) {
                Ok(old) if old.transcript == *transcript => return Ok(()),
                Ok(_) => return Err(ToolError::Nondeterministic { tool: tool_id.to_string() }),
                Err(_) => {
                    // Unreadable entry: replace it.
                    let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io(&self.dir))?;
                    tmp.write_all(&bytes).map_err(io(&path))?;
                    tmp.persist(&path).map_err(|e| ToolError::Cache { path: path.clone(), source: e.error })?;
                    return Ok(());
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(ToolError::Cache { path, source: e }),
        }

        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io(&self.dir))?;
        tmp.write_all(&bytes).map_err(io(&path))?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(()),
            Err(e) if e.error.kind() == std::io::ErrorKind::AlreadyExists => match self.get(key) {
                Some(t) if t == *transcript => Ok(()),
                _ => Err(ToolError::Nondeterministic { tool: tool_id.to_string() }),
            },
            Err(e) => Err(ToolError::Cache { path, source: e.error }),
        }
    }
}

/// Runs tools from a manifest, consulting an optional cache. Safe to share
/// across threads.
#[derive(Debug)]
pub struct ToolRunner {
    manifest: ToolManifest,
    cache: Option<Cache>,
    budget: Budget,
    requests: AtomicUsize,
    invocations: AtomicUsize,
    hits: AtomicUsize,
    versions: Mutex<HashMap<String, String>>,
}

impl ToolRunner {
    pub fn new(manifest: ToolManifest, cache: Option<Cache>) -> Self {
        ToolRunner {
            manifest,
            cache,
            budget: Budget::default(),
            requests: AtomicUsize::new(0),
            invocations: AtomicUsize::new(0),
            hits: AtomicUsize::new(0),
            versions: Mutex::new(HashMap::new()),
        }
    }

    /// Budget used by the in-process engine tool.
    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn manifest(&self) -> &ToolManifest {
        &self.manifest
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Number of times a tool actually ran (cache misses).
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::SeqCst)
    }

    pub fn cache_hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    fn builtin(&self, id: &str) -> bool {
        id == ENGINE_TOOL && !self.manifest.tools.contains_key(id)
    }

    fn spec(&self, id: &str) -> Result<&ToolSpec, ToolError> {
        self.manifest.tools.get(id).ok_or_else(|| ToolError::UnknownTool(id.to_string()))
    }

    pub fn tool_version(&self, tool_id: &str) -> Result<String, ToolError> {
        if self.builtin(tool_id) {
            return Ok(format!("builtin-{}", env!("CARGO_PKG_VERSION")));
        }
        let spec = self.spec(tool_id)?;
        if let Some(v) = self.versions.lock().unwrap().get(tool_id) {
            return Ok(v.clone());
        }
        let version = match &spec.version_command {
            None => "unversioned".to_string(),
            Some(argv) => {
                let fail = |message: String| ToolError::SpawnFailure { tool: tool_id.to_string(), message };
                let mut cmd = self.manifest.command(argv, &spec.scrub);
                cmd.stdin(Stdio::null());
                let out = cmd.output().map_err(|e| fail(format!("version command: {e}")))?;
                if !out.status.success() {
                    return Err(fail(format!("version command exited with {}", out.status)));
                }
                String::from_utf8_lossy(&out.stdout).trim().to_string()
            }
        };
        self.versions.lock().unwrap().insert(tool_id.to_string(), version.clone());
        Ok(version)
    }

    pub fn run(&self, request: &ToolRequest) -> Result<Transcript, ToolError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        if !self.builtin(&request.tool_id) {
            self.spec(&request.tool_id)?;
        }
        let version = self.tool_version(&request.tool_id)?;
        let key = CacheKey::new(request, &version);
        if let Some(cache) = &self.cache {
            if let Some(t) = cache.get(&key) {
                self.hits.fetch_add(1, Ordering::SeqCst);
                return Ok(t);
            }
        }
        self.invocations.fetch_add(1, Ordering::SeqCst);
        let transcript = if self.builtin(&request.tool_id) {
            run_engine(request, self.budget)
        } else {
            self.spawn(request)?
        };
        if let Some(cache) = &self.cache {
            if !transcript.timed_out() {
                cache.put(&key, &request.tool_id, &version, &transcript)?;
            }
        }
        Ok(transcript)
    }

    fn spawn(&self, request: &ToolRequest) -> Result<Transcript, ToolError> {
        let spec = self.spec(&request.tool_id)?;
        let fail = |message: String| ToolError::SpawnFailure { tool: request.tool_id.clone(), message };

        let workdir = tempfile::tempdir().map_err(|e| fail(e.to_string()))?;
        let input_path = workdir.path().join(safe_file_name(&request.file_name));
        if spec.input_mode == InputMode::File {
            std::fs::write(&input_path, &request.input).map_err(|e| fail(e.to_string()))?;
        }
        let input_arg = input_path.to_string_lossy().into_owned();

        let mut argv = Vec::new();
        let mut saw_options = false;
        let mut saw_input = false;
        for arg in &spec.command {
            if arg == "{options}" {
                argv.extend(request.options.iter().cloned());
                saw_options = true;
            } else if spec.input_mode == InputMode::File && arg.contains("{input}") {
                argv.push(arg.replace("{input}", &input_arg));
                saw_input = true;
            } else {
                argv.push(arg.clone());
            }
        }
        if !saw_options {
            argv.extend(request.options.iter().cloned());
        }
        if spec.input_mode == InputMode::File && !saw_input {
            argv.push(input_arg);
        }

        let mut cmd = self.manifest.command(&argv, &spec.scrub);
        cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
        cmd.stdin(if spec.input_mode == InputMode::Stdin { Stdio::piped() } else { Stdio::null() });
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd.spawn().map_err(|e| fail(format!("{}: {e}", argv[0])))?;

        let stdin_writer = child.stdin.take().map(|mut stdin| {
            let input = request.input.clone();
            std::thread::spawn(move || {
                let _ = stdin.write_all(input.as_bytes());
            })
        });
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let timeout = Duration::from_millis(spec.timeout_ms);
        let status = child.wait_timeout(timeout).map_err(|e| fail(e.to_string()))?;
        let exit_code = match status {
            Some(status) => exit_code(status),
            None => {
                kill_group(&child);
                let _ = child.kill();
                let _ = child.wait();
                TIMEOUT_EXIT_CODE
            }
        };
        if let Some(w) = stdin_writer {
            let _ = w.join();
        }
        let stdout = stdout.join().unwrap_or_default();
        let mut stderr = stderr.join().unwrap_or_default();
        if exit_code == TIMEOUT_EXIT_CODE && status.is_none() {
            if !stderr.is_empty() && !stderr.ends_with('\n') {
                stderr.push('\n');
            }
            stderr.push_str(&format!("ald: tool timed out after {} ms\n", spec.timeout_ms));
        }
        Ok(Transcript { stdout, stderr, exit_code })
    }
}

/// Kills the tool and anything it started, so no descendant keeps the
/// output pipes open.
#[cfg(unix)]
fn kill_group(child: &std::process::Child) {
    if let Ok(pid) = libc::pid_t::try_from(child.id()) {
        // SAFETY: plain syscall on a process group we created.
        unsafe {
            libc::kill(-pid, libc::SIGKILL);
        }
    }
}

#[cfg(not(unix))]
fn kill_group(_child: &std::process::Child) {}

fn safe_file_name(name: &str) -> String {
    let base = Path::new(name).file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if base.is_empty() || base.starts_with('.') {
        "input.pl".to_string()
    } else {
        base
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn exit_code(status: std::process::ExitStatus) -> i32 {
    use std::os::unix::process::ExitStatusExt;
    status.code().unwrap_or_else(|| 128 + status.signal().unwrap_or(0))
}

#[cfg(not(unix))]
fn exit_code(status: std::process::ExitStatus) -> i32 {
    status.code().unwrap_or(1)
}

fn run_engine(request: &ToolRequest, budget: Budget) -> Transcript {
    let mut budget = budget;
    let mut query = None;
    let mut problems = Vec::new();
    for opt in &request.options {
        if let Some(q) = opt.strip_prefix("--query=") {
            query = Some(q.to_string());
        } else if let Some(n) = opt.strip_prefix("--answers=") {
            match n.parse() {
                Ok(n) => budget.max_answers = n,
                Err(_) => problems.push(format!("bad --answers value `{n}`")),
            }
        } else if let Some(d) = opt.strip_prefix("--depth=") {
            match d.parse() {
                Ok(d) => budget.max_depth = d,
                Err(_) => problems.push(format!("bad --depth value `{d}`")),
            }
        } else {
            problems.push(format!("unknown option `{opt}`"));
        }
    }
    if query.is_none() {
        problems.push("missing --query=<goal>".to_string());
    }
    if !problems.is_empty() {
        return Transcript {
            stdout: String::new(),
            stderr: problems.iter().map(|p| format!("error: {p}\n")).collect(),
            exit_code: 2,
        };
    }
    let out = ald_engine::transcript::run(&request.input, query.as_deref().unwrap_or_default(), &budget);
    Transcript { stdout: out.stdout, stderr: out.stderr, exit_code: out.exit_code }
}
