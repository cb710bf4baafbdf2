use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use crate::error::{Error, Result};

/// Runs `exec` over `items` on at most `workers` threads pulling from the ordered list.
/// Results come back in input order regardless of completion order; a failing item
/// does not stop the others.
pub fn run_tasks<T, R, F>(items: &[T], workers: usize, exec: F) -> Result<Vec<Result<R>>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync,
{
    if workers == 0 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let slots: Vec<Mutex<Option<Result<R>>>> = items.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|scope| {
        for _ in 0..workers.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let outcome = exec(i, &items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(outcome);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("result slot poisoned")
                .unwrap_or_else(|| Err(Error::Invariant("task produced no result".into())))
        })
        .collect())
}
