use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use super::wire::{TokenizeRequest, WireRequest, WireResponse};
use super::{Endpoint, ServerConfig};
use crate::prob_backends::{MaskedQuery, ModelError, ProbabilityModel, TokenDistribution};
use crate::storage::SentenceTokens;

type Reply = Result<WireResponse, ModelError>;

/// Response routing shared between callers and the reader thread.
#[derive(Default)]
struct Router {
    pending: Mutex<HashMap<String, Sender<Reply>>>,
    closed: AtomicBool,
}

impl Router {
    fn fail_all(&self, error: ModelError) {
        let mut pending = self.pending.lock().expect("router lock");
        for (_, tx) in pending.drain() {
            let _ = tx.send(Err(error.clone()));
        }
    }

    fn deliver(&self, line: &str) {
        let resp: WireResponse = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                self.fail_all(ModelError::Protocol(format!("unparseable response: {e}")));
                return;
            }
        };
        let tx = self.pending.lock().expect("router lock").remove(&resp.id);
        match tx {
            Some(tx) => {
                let _ = tx.send(Ok(resp));
            }
            None => self.fail_all(ModelError::Protocol(format!(
                "response for unknown id {:?}",
                resp.id
            ))),
        }
    }
}

fn reader_loop(reader: impl Read, router: Arc<Router>) {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    loop {
        line.clear();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                let trimmed = line.trim_end_matches(['\n', '\r']);
                if !trimmed.is_empty() {
                    router.deliver(trimmed);
                }
            }
            Err(e) => {
                router.closed.store(true, Ordering::SeqCst);
                router.fail_all(ModelError::Transport(format!("read failed: {e}")));
                return;
            }
        }
    }
    router.closed.store(true, Ordering::SeqCst);
    router.fail_all(ModelError::Transport("server closed the connection".into()));
}

/// Counting semaphore bounding un-acknowledged requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

type CacheCell = Arc<Mutex<Option<Vec<TokenDistribution>>>>;

/// Blocking, thread-safe client for the masked-LM wire protocol.
///
/// Writes are serialized; responses are matched to callers by id, so any
/// number of threads may have requests in flight (up to `max_inflight`).
pub struct LmClient {
    config: ServerConfig,
    writer: Mutex<Box<dyn Write + Send>>,
    router: Arc<Router>,
    next_id: AtomicU64,
    slots: Slots,
    cache: Mutex<HashMap<String, CacheCell>>,
    sent: AtomicUsize,
    child: Option<Mutex<Child>>,
    socket: Option<TcpStream>,
}

impl LmClient {
    pub fn connect(config: ServerConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let timeout = Duration::from_millis(config.timeout_ms);
        let router = Arc::new(Router::default());
        let mut socket = None;
        let (writer, reader, child): (Box<dyn Write + Send>, Box<dyn Read + Send>, Option<Child>) =
            match &config.endpoint {
                Endpoint::Tcp(addr) => {
                    let sock = addr
                        .to_socket_addrs()
                        .map_err(|e| ModelError::Transport(format!("cannot resolve {addr}: {e}")))?
                        .next()
                        .ok_or_else(|| ModelError::Transport(format!("no address for {addr}")))?;
                    let stream = TcpStream::connect_timeout(&sock, timeout)
                        .map_err(|e| ModelError::Transport(format!("connect {addr}: {e}")))?;
                    let _ = stream.set_nodelay(true);
                    let read_half = stream
                        .try_clone()
                        .map_err(|e| ModelError::Transport(format!("clone socket: {e}")))?;
                    socket = stream.try_clone().ok();
                    (Box::new(stream), Box::new(read_half), None)
                }
                Endpoint::Stdio(argv) => {
                    let mut child = Command::new(&argv[0])
                        .args(&argv[1..])
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .stderr(Stdio::inherit())
                        .spawn()
                        .map_err(|e| ModelError::Transport(format!("spawn {}: {e}", argv[0])))?;
                    let stdin = child.stdin.take().expect("piped stdin");
                    let stdout = child.stdout.take().expect("piped stdout");
                    (Box::new(stdin), Box::new(stdout), Some(child))
                }
            };
        let reader_router = Arc::clone(&router);
        thread::Builder::new()
            .name("lm-client-reader".into())
            .spawn(move || reader_loop(reader, reader_router))
            .map_err(|e| ModelError::Transport(format!("spawn reader: {e}")))?;
        Ok(LmClient {
            slots: Slots {
                free: Mutex::new(config.max_inflight),
                cv: Condvar::new(),
            },
            config,
            writer: Mutex::new(writer),
            router,
            next_id: AtomicU64::new(1),
            cache: Mutex::new(HashMap::new()),
            sent: AtomicUsize::new(0),
            child: child.map(Mutex::new),
            socket,
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.config
    }

    /// Requests written to the server so far (cache hits excluded).
    pub fn requests_sent(&self) -> usize {
        self.sent.load(Ordering::SeqCst)
    }

    fn round_trip(&self, make_line: impl FnOnce(String) -> String) -> Reply {
        let _slot = self.slots.acquire();
        if self.router.closed.load(Ordering::SeqCst) {
            return Err(ModelError::Transport("connection is closed".into()));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst).to_string();
        let (tx, rx) = mpsc::channel();
        self.router
            .pending
            .lock()
            .expect("router lock")
            .insert(id.clone(), tx);
        // the reader may have closed between the check above and the insert
        if self.router.closed.load(Ordering::SeqCst) {
            self.router.pending.lock().expect("router lock").remove(&id);
            return Err(ModelError::Transport("connection is closed".into()));
        }
        let mut line = make_line(id.clone());
        line.push('\n');
        {
            let mut w = self.writer.lock().expect("writer lock");
            if let Err(e) = w.write_all(line.as_bytes()).and_then(|_| w.flush()) {
                self.router.pending.lock().expect("router lock").remove(&id);
                return Err(ModelError::Transport(format!("write failed: {e}")));
            }
        }
        self.sent.fetch_add(1, Ordering::SeqCst);
        match rx.recv_timeout(Duration::from_millis(self.config.timeout_ms)) {
            Ok(reply) => reply,
            Err(RecvTimeoutError::Timeout) => {
                self.router.pending.lock().expect("router lock").remove(&id);
                Err(ModelError::Transport(format!(
                    "no response within {} ms",
                    self.config.timeout_ms
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(ModelError::Transport("connection lost".into()))
            }
        }
    }

    fn cache_key(&self, query: &MaskedQuery) -> String {
        serde_json::to_string(&(&query.tokens, &query.mask_positions, self.config.top_k))
            .expect("serializable key")
    }

    /// One distribution per mask slot. Identical queries reach the server
    /// at most once per client; failures are not cached.
    pub fn query(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        query.validate()?;
        let cell = {
            let mut cache = self.cache.lock().expect("cache lock");
            Arc::clone(cache.entry(self.cache_key(query)).or_default())
        };
        let mut slot = cell.lock().expect("cache cell lock");
        if let Some(hit) = slot.as_ref() {
            return Ok(hit.clone());
        }
        let top_k = self.config.top_k;
        let resp = self.round_trip(|id| {
            serde_json::to_string(&WireRequest::new(id, query, top_k))
                .expect("serializable request")
        })?;
        let dists = resp.into_distributions(query.mask_positions.len())?;
        *slot = Some(dists.clone());
        Ok(dists)
    }

    /// Results aligned with `queries`; each slot carries its own error.
    pub fn batch_query(
        &self,
        queries: &[MaskedQuery],
    ) -> Vec<Result<Vec<TokenDistribution>, ModelError>> {
        type Slot = Mutex<Option<Result<Vec<TokenDistribution>, ModelError>>>;
        let results: Vec<Slot> = queries.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_inflight.min(queries.len());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= queries.len() {
                        break;
                    }
                    *results[i].lock().expect("result lock") = Some(self.query(&queries[i]));
                });
            }
        });
        results
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .expect("result lock")
                    .expect("every slot filled")
            })
            .collect()
    }

    pub fn tokenize_words(&self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        if words.is_empty() {
            return Err(ModelError::InvalidQuery("empty word list".into()));
        }
        let resp = self.round_trip(|id| {
            serde_json::to_string(&TokenizeRequest::new(id, words)).expect("serializable request")
        })?;
        resp.into_tokens(words)
    }
}

impl Drop for LmClient {
    fn drop(&mut self) {
        if let Some(sock) = &self.socket {
            let _ = sock.shutdown(std::net::Shutdown::Both);
        }
        if let Some(child) = &self.child {
            let mut child = child.lock().expect("child lock");
            // closing stdin lets a well-behaved server exit on its own
            *self.writer.lock().expect("writer lock") = Box::new(std::io::sink());
            if child.try_wait().ok().flatten().is_none() {
                thread::sleep(Duration::from_millis(20));
                if child.try_wait().ok().flatten().is_none() {
                    let _ = child.kill();
                }
            }
            let _ = child.wait();
        }
    }
}

impl ProbabilityModel for LmClient {
    fn predict_masked(&self, query: &MaskedQuery) -> Result<Vec<TokenDistribution>, ModelError> {
        self.query(query)
    }

    fn identity(&self) -> String {
        let top = self
            .config
            .top_k
            .map_or_else(|| "full".to_string(), |k| format!("top{k}"));
        format!("server:{},{}", self.config.endpoint, top)
    }

    fn tokenize(&self, words: &[String]) -> Result<SentenceTokens, ModelError> {
        self.tokenize_words(words)
    }
}
