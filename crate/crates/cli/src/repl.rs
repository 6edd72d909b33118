//! Interactive chat loop with the engine embedded in-process.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use convex_core::dialogue::{DialogueError, Engine};
use convex_core::session::{Session, Speaker};
use convex_core::session_store::{write_atomic, SessionStore, StoreError};
use convex_core::tabular::{parse_csv, serialize_csv, table_stem};
use uuid::Uuid;

use crate::render::artifact_body;

pub const HELP: &str = "\
commands:
  /upload PATH   upload a CSV file or workbook bundle
  /pause         pause the session and print its snapshot id
  /resume ID     resume a paused session
  /story         end the session and print the story
  /session       show the session id and directory
  /help          show this help
  /quit          leave (the session stays saved)
anything else is sent to the assistant.
";

const TRANSCRIPT: &str = "transcript.txt";

#[derive(Debug, Clone)]
pub struct ReplConfig {
    pub store: PathBuf,
    pub seed: u64,
    pub delimiter: char,
    pub user: String,
    pub data: Option<PathBuf>,
    pub script: Option<PathBuf>,
}

struct Repl<W: Write> {
    engine: Engine,
    store: SessionStore,
    session: Session,
    config: ReplConfig,
    /// Lines that rebuild the session's artifacts when replayed.
    transcript: Vec<String>,
    out: W,
}

enum Flow {
    Continue,
    Quit,
}

/// Runs the chat: `--data`, then the script, then `input` until EOF or `/quit`.
pub fn run(config: ReplConfig, input: impl BufRead, out: impl Write) -> Result<()> {
    let store = SessionStore::open(&config.store)
        .with_context(|| format!("cannot open the store at {}", config.store.display()))?;
    let engine = Engine::standard();
    engine.set_knowledge(store.load_knowledge()?);
    let session = engine.new_session(&config.user, config.seed);
    let mut repl = Repl {
        engine,
        store,
        session,
        config: config.clone(),
        transcript: Vec::new(),
        out,
    };
    writeln!(repl.out, "session {} (type /help for commands)", repl.session.id)?;

    if let Some(data) = &config.data {
        let line = format!("/upload {}", data.display());
        if let Flow::Quit = repl.line(&line)? {
            return repl.finish();
        }
    }
    if let Some(script) = &config.script {
        let text =
            std::fs::read_to_string(script).with_context(|| format!("cannot read script {}", script.display()))?;
        for line in text.lines() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            writeln!(repl.out, "you> {line}")?;
            if let Flow::Quit = repl.line(line)? {
                return repl.finish();
            }
        }
    }
    for line in input.lines() {
        let line = line.context("cannot read input")?;
        if let Flow::Quit = repl.line(&line)? {
            break;
        }
    }
    repl.finish()
}

impl<W: Write> Repl<W> {
    fn line(&mut self, raw: &str) -> Result<Flow> {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(Flow::Continue);
        }
        let Some(command) = line.strip_prefix('/') else {
            let start = self.session.turns.len();
            let result = self.engine.handle_turn(&mut self.session, line).map(|_| ());
            self.after(result, start, Some(line.to_string()))?;
            return Ok(Flow::Continue);
        };
        let (name, arg) = command.split_once(char::is_whitespace).unwrap_or((command, ""));
        let arg = arg.trim();
        match name {
            "quit" | "exit" => return Ok(Flow::Quit),
            "help" => write!(self.out, "{HELP}")?,
            "session" => writeln!(
                self.out,
                "session {} ({:?}) in {}",
                self.session.id,
                self.session.status,
                self.store.session_dir(self.session.id).display()
            )?,
            "upload" if !arg.is_empty() => self.upload(Path::new(arg))?,
            "pause" => self.pause()?,
            "resume" if !arg.is_empty() => self.resume(arg)?,
            "story" => self.story()?,
            _ => write!(self.out, "unknown command `{line}`\n{HELP}")?,
        }
        Ok(Flow::Continue)
    }

    fn upload(&mut self, path: &Path) -> Result<()> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) => {
                writeln!(self.out, "error: cannot read {}: {e}", path.display())?;
                return Ok(());
            }
        };
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data.csv".into());
        let (bytes, name) = if self.config.delimiter == ',' {
            (bytes, name)
        } else {
            let stem = table_stem(&name);
            match parse_csv(&bytes, self.config.delimiter, &stem) {
                Ok(table) => (serialize_csv(&table, ',').into_bytes(), format!("{stem}.csv")),
                Err(e) => {
                    writeln!(self.out, "error: {e}")?;
                    return Ok(());
                }
            }
        };
        let start = self.session.turns.len();
        let result = self.engine.upload(&mut self.session, &bytes, &name, None).map(|_| ());
        let absolute = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
        self.after(result, start, Some(format!("/upload {}", absolute.display())))?;
        Ok(())
    }

    fn pause(&mut self) -> Result<()> {
        match self.engine.pause(&mut self.session) {
            Ok(snapshot) => {
                let path = self.store.save_snapshot(&snapshot)?;
                self.persist()?;
                writeln!(
                    self.out,
                    "paused; snapshot id {} ({})\nresume later with /resume {}",
                    self.session.id,
                    path.display(),
                    self.session.id
                )?;
            }
            Err(e) => self.report(&e)?,
        }
        Ok(())
    }

    fn resume(&mut self, raw: &str) -> Result<()> {
        let Ok(id) = Uuid::parse_str(raw) else {
            writeln!(self.out, "error: `{raw}` is not a session id")?;
            return Ok(());
        };
        if id != self.session.id {
            let session = match self.store.load_session(id) {
                Ok(s) => s,
                Err(StoreError::NotFound(_)) => {
                    writeln!(self.out, "error: no saved session {id}")?;
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            };
            self.session = session;
            self.transcript = self.load_transcript()?;
        }
        match self.engine.resume(&mut self.session) {
            Ok(()) => {
                self.persist()?;
                writeln!(self.out, "resumed session {}", self.session.id)?;
                let last_bot = self.session.turns.iter().rev().find(|t| t.speaker == Speaker::Bot);
                if let Some(t) = last_bot {
                    writeln!(self.out, "bot> {}", t.text)?;
                }
            }
            Err(e) => self.report(&e)?,
        }
        Ok(())
    }

    fn story(&mut self) -> Result<()> {
        if self.session.story.is_none() {
            let start = self.session.turns.len();
            let result = self.engine.end_session(&mut self.session).map(|_| ());
            if !self.after(result, start, Some("/story".into()))? {
                return Ok(());
            }
        }
        let id = self.session.story.clone().expect("story present");
        if let Some(bytes) = self.session.workspace.payload(&id) {
            writeln!(self.out, "{}", String::from_utf8_lossy(bytes).trim_end())?;
        }
        Ok(())
    }

    /// Saves and prints the bot turns added since `start`; returns whether
    /// the action succeeded.
    fn after(&mut self, result: Result<(), DialogueError>, start: usize, record: Option<String>) -> Result<bool> {
        if let Err(e) = result {
            self.report(&e)?;
            return Ok(false);
        }
        if let Some(line) = record {
            self.transcript.push(line);
        }
        self.persist()?;
        self.print_turns(start)?;
        Ok(true)
    }

    fn report(&mut self, e: &DialogueError) -> Result<()> {
        match e.remedy() {
            Some(r) => writeln!(self.out, "error: {e} ({r})")?,
            None => writeln!(self.out, "error: {e}")?,
        }
        Ok(())
    }

    fn print_turns(&mut self, start: usize) -> Result<()> {
        let mut shown = HashSet::new();
        for turn in &self.session.turns[start..] {
            if turn.speaker != Speaker::Bot {
                continue;
            }
            writeln!(self.out, "bot> {}", turn.text)?;
            for id in &turn.artifacts {
                if !shown.insert(id.clone()) {
                    continue;
                }
                let Some(artifact) = self.session.workspace.artifact(id) else {
                    continue;
                };
                if let Some(body) = self
                    .session
                    .workspace
                    .payload(id)
                    .and_then(|p| artifact_body(artifact, p))
                {
                    write!(self.out, "{body}")?;
                }
                if let Some(path) = self.store.artifact_path(&self.session, id) {
                    writeln!(self.out, "  [{}] saved to {}", artifact.title, path.display())?;
                }
            }
        }
        Ok(())
    }

    fn transcript_path(&self) -> PathBuf {
        self.store.session_dir(self.session.id).join(TRANSCRIPT)
    }

    fn load_transcript(&self) -> Result<Vec<String>> {
        match std::fs::read_to_string(self.transcript_path()) {
            Ok(text) => Ok(text
                .lines()
                .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
                .map(String::from)
                .collect()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn persist(&mut self) -> Result<()> {
        self.store.save_session(&self.session)?;
        self.store.save_knowledge(&self.engine.knowledge())?;
        let mut text = format!(
            "# replay with: convex repl --seed {} --delimiter '{}' --script {}\n",
            self.session.workspace.seed, self.config.delimiter, TRANSCRIPT
        );
        for line in &self.transcript {
            text.push_str(line);
            text.push('\n');
        }
        write_atomic(&self.transcript_path(), text.as_bytes())?;
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        if self.session.turns.is_empty() {
            writeln!(self.out, "nothing to save")?;
            return Ok(());
        }
        self.persist()?;
        writeln!(
            self.out,
            "session {} saved in {}",
            self.session.id,
            self.store.session_dir(self.session.id).display()
        )?;
        Ok(())
    }
}
