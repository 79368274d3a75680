use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use tokio::sync::Notify;

use crate::wire::{SequencedItem, StreamItem, StreamPage};

/// Bounded, sequence-numbered buffer of incoming (unlabeled) items. Replay
/// streams append to it; the console polls it.
#[derive(Debug)]
pub struct Feed {
    capacity: usize,
    inner: Mutex<FeedState>,
    arrived: Notify,
}

#[derive(Debug, Default)]
struct FeedState {
    items: VecDeque<SequencedItem>,
    next_seq: u64,
}

impl Feed {
    pub fn new(capacity: usize) -> Self {
        Feed {
            capacity: capacity.max(1),
            inner: Mutex::new(FeedState {
                items: VecDeque::new(),
                next_seq: 1,
            }),
            arrived: Notify::new(),
        }
    }

    /// Appends items, returning the sequence number of the last one.
    pub fn push(&self, items: Vec<StreamItem>) -> u64 {
        let mut st = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        for item in items {
            let seq = st.next_seq;
            st.next_seq += 1;
            st.items.push_back(SequencedItem {
                seq,
                id: item.id,
                text: item.text,
            });
            if st.items.len() > self.capacity {
                st.items.pop_front();
            }
        }
        let last = st.next_seq - 1;
        drop(st);
        self.arrived.notify_waiters();
        last
    }

    /// Items with `seq > after`, oldest first, at most `limit` of them.
    pub fn page(&self, after: u64, limit: usize) -> StreamPage {
        let st = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let items: Vec<SequencedItem> = st.items.iter().filter(|i| i.seq > after).take(limit).cloned().collect();
        let next = items.last().map_or(after, |i| i.seq);
        StreamPage { items, next }
    }

    /// Like [`Feed::page`], but waits up to `wait` for something new.
    pub async fn wait_page(&self, after: u64, limit: usize, wait: Duration) -> StreamPage {
        let notified = self.arrived.notified();
        let page = self.page(after, limit);
        if !page.items.is_empty() || wait.is_zero() {
            return page;
        }
        let _ = tokio::time::timeout(wait, notified).await;
        self.page(after, limit)
    }
}
