//! Oracle test doubles: scripted responses with a call log, and a
//! wrapper that injects transport failures and latency.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::OracleError;
use crate::oracle::{check_range, Oracle, OracleHandle};

type ResponseFn = dyn Fn(&[f64], u64, usize) -> f64 + Send + Sync;

enum Script {
    Table(BTreeMap<(u64, usize), f64>),
    Func(Box<ResponseFn>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CallRecord {
    pub seq: u64,
    pub instance_id: u64,
    pub concept: usize,
    pub value: Result<f64, OracleError>,
}

/// Append-only call log shared by the fixtures in this module.
#[derive(Default)]
pub struct CallLog {
    entries: Mutex<Vec<CallRecord>>,
    next: AtomicU64,
}

impl CallLog {
    fn append(&self, instance_id: u64, concept: usize, value: Result<f64, OracleError>) {
        let mut entries = self.entries.lock().unwrap();
        let seq = self.next.fetch_add(1, Ordering::SeqCst) + 1;
        entries.push(CallRecord { seq, instance_id, concept, value });
    }

    pub fn snapshot(&self) -> Vec<CallRecord> {
        self.entries.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Records sorted by `(instance_id, concept)`, dropping sequence numbers;
/// comparable across runs whose query order differs.
pub fn canonical(records: &[CallRecord]) -> Vec<(u64, usize, Result<f64, OracleError>)> {
    let mut out: Vec<_> = records.iter().map(|r| (r.instance_id, r.concept, r.value.clone())).collect();
    out.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    out
}

pub struct ScriptedOracle {
    script: Script,
    log: CallLog,
}

impl ScriptedOracle {
    /// Responses outside `[0, 1]` are rejected here rather than at query time.
    pub fn from_table(table: impl IntoIterator<Item = ((u64, usize), f64)>) -> Result<Self, OracleError> {
        let mut map = BTreeMap::new();
        for (key, v) in table {
            map.insert(key, check_range(v)?);
        }
        Ok(Self { script: Script::Table(map), log: CallLog::default() })
    }

    pub fn from_fn(f: impl Fn(&[f64], u64, usize) -> f64 + Send + Sync + 'static) -> Self {
        Self { script: Script::Func(Box::new(f)), log: CallLog::default() }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_fn(move |_, _, _| value)
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }
}

impl Oracle for ScriptedOracle {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        let value = match &self.script {
            Script::Table(t) => t
                .get(&(instance_id, concept))
                .copied()
                .ok_or(OracleError::Lookup { instance_id, concept }),
            Script::Func(f) => check_range(f(instance, instance_id, concept)),
        };
        self.log.append(instance_id, concept, value.clone());
        value
    }

    fn kind(&self) -> &str {
        "scripted"
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaultPlan {
    /// 1-based call numbers that fail with a transport error.
    pub fail_calls: BTreeSet<u64>,
    pub fail_all: bool,
    pub latency: Option<Duration>,
}

impl FaultPlan {
    pub fn fail_on(calls: impl IntoIterator<Item = u64>) -> Self {
        Self { fail_calls: calls.into_iter().collect(), ..Self::default() }
    }

    pub fn fail_every_call() -> Self {
        Self { fail_all: true, ..Self::default() }
    }
}

pub struct FaultyOracle<O> {
    inner: O,
    plan: FaultPlan,
    calls: AtomicU64,
    log: CallLog,
}

impl<O: Oracle> FaultyOracle<O> {
    pub fn new(inner: O, plan: FaultPlan) -> Self {
        Self { inner, plan, calls: AtomicU64::new(0), log: CallLog::default() }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn log(&self) -> &CallLog {
        &self.log
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<O: Oracle> Oracle for FaultyOracle<O> {
    fn query(&self, instance: &[f64], instance_id: u64, concept: usize) -> Result<f64, OracleError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if let Some(d) = self.plan.latency {
            std::thread::sleep(d);
        }
        let value = if self.plan.fail_all || self.plan.fail_calls.contains(&call) {
            Err(injected(call))
        } else {
            self.inner.query(instance, instance_id, concept)
        };
        self.log.append(instance_id, concept, value.clone());
        value
    }

    fn kind(&self) -> &str {
        self.inner.kind()
    }
}

/// The transport error a planned fault on 1-based call `call` raises.
pub fn injected(call: u64) -> OracleError {
    OracleError::Transport { attempts: 1, message: format!("injected fault on call #{call}") }
}

/// Returns the handle together with the wrapper so callers can inspect
/// its log after handing the handle to production code.
pub fn wrap_with_faults<O: Oracle + 'static>(oracle: O, plan: FaultPlan) -> (OracleHandle, Arc<FaultyOracle<O>>) {
    let faulty = Arc::new(FaultyOracle::new(oracle, plan));
    (OracleHandle::Custom(faulty.clone()), faulty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_lookup_and_log() {
        let o = ScriptedOracle::from_table([((1, 0), 0.25), ((1, 1), 0.75)]).unwrap();
        assert_eq!(o.query(&[], 1, 1).unwrap(), 0.75);
        assert!(matches!(o.query(&[], 2, 0), Err(OracleError::Lookup { .. })));
        let log = o.log().snapshot();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].seq, 1);
        assert_eq!(log[1].seq, 2);
    }

    #[test]
    fn out_of_range_script_rejected() {
        assert!(ScriptedOracle::from_table([((0, 0), 1.5)]).is_err());
        assert!(matches!(ScriptedOracle::constant(-0.1).query(&[], 0, 0), Err(OracleError::Range { .. })));
    }

    #[test]
    fn planned_calls_fail() {
        let (h, f) = wrap_with_faults(ScriptedOracle::constant(0.5), FaultPlan::fail_on([2]));
        assert_eq!(h.query(&[], 0, 0).unwrap(), 0.5);
        assert_eq!(h.query(&[], 0, 1), Err(injected(2)));
        assert_eq!(h.query(&[], 0, 2).unwrap(), 0.5);
        assert_eq!(f.calls(), 3);
        assert_eq!(f.inner().log().len(), 2);
    }
}
