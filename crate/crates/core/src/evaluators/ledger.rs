use serde::{Deserialize, Serialize};

use crate::error::{GeeseError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub index: usize,
    pub state: Vec<f64>,
    pub errors: Vec<f64>,
}

/// Append-only record of physical evaluations under a fixed budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLedger {
    budget: usize,
    log: Vec<QueryRecord>,
}

impl QueryLedger {
    pub fn new(budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(GeeseError::InvalidConfig("query budget must be positive".into()));
        }
        Ok(QueryLedger { budget, log: Vec::new() })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn count(&self) -> usize {
        self.log.len()
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.log.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.log.len() >= self.budget
    }

    pub fn log(&self) -> &[QueryRecord] {
        &self.log
    }

    pub fn into_log(self) -> Vec<QueryRecord> {
        self.log
    }

    pub(crate) fn ensure_capacity(&self) -> Result<()> {
        if self.is_exhausted() {
            return Err(GeeseError::BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    pub(crate) fn record(&mut self, state: Vec<f64>, errors: Vec<f64>) {
        debug_assert!(!self.is_exhausted());
        let index = self.log.len();
        self.log.push(QueryRecord { index, state, errors });
    }
}
