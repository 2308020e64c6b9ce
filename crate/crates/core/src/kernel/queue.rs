use std::collections::BTreeMap;

use super::SimTime;
use crate::error::KernelError;

/// Identifies one scheduled event; used to cancel it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventHandle {
    fire_at: SimTime,
    seq: u64,
}

impl EventHandle {
    pub fn fire_at(&self) -> SimTime {
        self.fire_at
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }
}

/// A popped event: when it fired, its insertion counter and the action.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<A> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub action: A,
}

/// Time-ordered event queue with a virtual clock.
///
/// Events are keyed by `(fire_at, seq)` where `seq` is a monotone insertion
/// counter, so two events never compare equal and same-time events fire in
/// insertion order.
#[derive(Debug)]
pub struct EventQueue<A> {
    now: SimTime,
    next_seq: u64,
    pending: BTreeMap<(SimTime, u64), A>,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> EventQueue<A> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            pending: BTreeMap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, at: SimTime, action: A) -> Result<EventHandle, KernelError> {
        if at < self.now {
            return Err(KernelError::SchedulingInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((at, seq), action);
        Ok(EventHandle { fire_at: at, seq })
    }

    /// Schedules `delay` after the current clock; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, action: A) -> EventHandle {
        let at = self.now.saturating_add(delay);
        self.schedule(at, action)
            .expect("now + delay is never in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) -> Result<A, KernelError> {
        self.pending
            .remove(&(handle.fire_at, handle.seq))
            .ok_or(KernelError::UnknownEvent { seq: handle.seq })
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.pending.keys().next().map(|(t, _)| *t)
    }

    /// Pops the earliest event if it fires at or before `end`, advancing the clock.
    pub fn pop_until(&mut self, end: SimTime) -> Option<Event<A>> {
        let (&(fire_at, seq), _) = self.pending.first_key_value()?;
        if fire_at > end {
            return None;
        }
        let action = self.pending.remove(&(fire_at, seq))?;
        debug_assert!(fire_at >= self.now);
        self.now = fire_at;
        Some(Event {
            fire_at,
            seq,
            action,
        })
    }

    /// Processes every event with `fire_at <= end` in `(fire_at, seq)` order.
    ///
    /// The handler may schedule further events; those that fall inside the
    /// horizon are processed in the same call. Afterwards the clock reads `end`.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, Event<A>),
    {
        let mut processed = 0;
        while let Some(ev) = self.pop_until(end) {
            handler(self, ev);
            processed += 1;
        }
        if end > self.now {
            self.now = end;
        }
        processed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_at_now_is_accepted_and_fires_first() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(5), "later").unwrap();
        q.schedule(SimTime(0), "first").unwrap();
        let ev = q.pop_until(SimTime(10)).unwrap();
        assert_eq!(ev.action, "first");
        assert_eq!(ev.fire_at, SimTime(0));
    }

    #[test]
    fn same_time_events_fire_in_insertion_order() {
        let mut q = EventQueue::new();
        for i in 0..10 {
            q.schedule(SimTime(7), i).unwrap();
        }
        let mut seen = Vec::new();
        q.run_until(SimTime(7), |_, ev| seen.push(ev.action));
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn scheduling_in_the_past_is_rejected() {
        let mut q: EventQueue<()> = EventQueue::new();
        q.run_until(SimTime(10), |_, _| {});
        let err = q.schedule(SimTime(5), ()).unwrap_err();
        assert!(matches!(err, KernelError::SchedulingInPast { .. }));
    }

    #[test]
    fn run_until_empty_queue_processes_nothing() {
        let mut q: EventQueue<u8> = EventQueue::new();
        assert_eq!(q.run_until(SimTime(100), |_, _| {}), 0);
        assert_eq!(q.now(), SimTime(100));
    }

    #[test]
    fn run_until_includes_boundary() {
        let mut q = EventQueue::new();
        for t in 1..=3 {
            q.schedule(SimTime(t), t).unwrap();
        }
        assert_eq!(q.run_until(SimTime(2), |_, _| {}), 2);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn handler_can_schedule_within_horizon() {
        let mut q = EventQueue::new();
        q.schedule(SimTime(1), 0u32).unwrap();
        let n = q.run_until(SimTime(10), |q, ev| {
            if ev.action < 4 {
                q.schedule_in(SimTime(1), ev.action + 1);
            }
        });
        assert_eq!(n, 5);
    }

    #[test]
    fn clock_never_moves_backward() {
        let mut q = EventQueue::new();
        for (i, t) in [9u64, 3, 3, 7, 1, 8].into_iter().enumerate() {
            q.schedule(SimTime(t), i).unwrap();
        }
        let mut last = SimTime::ZERO;
        q.run_until(SimTime(100), |q, ev| {
            assert!(ev.fire_at >= last);
            assert_eq!(q.now(), ev.fire_at);
            last = ev.fire_at;
        });
    }

    #[test]
    fn cancel_once_removes_exactly_one_and_double_cancel_errors() {
        let mut q = EventQueue::new();
        let a = q.schedule(SimTime(4), 'a').unwrap();
        q.schedule(SimTime(4), 'b').unwrap();
        assert_eq!(q.cancel(a).unwrap(), 'a');
        assert_eq!(q.len(), 1);
        assert!(matches!(q.cancel(a), Err(KernelError::UnknownEvent { .. })));
        assert_eq!(q.len(), 1);
    }
}
