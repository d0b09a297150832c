use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Index of a parameter inside a [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    value: Matrix,
    grad: Option<Matrix>,
}

/// Ordered set of named trainable tensors with one gradient slot each.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    entries: Vec<Entry>,
}

impl ModelParams {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::Duplicate(alloc::format!("parameter {name:?}")));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite(alloc::format!("initial value of {name:?}")));
        }
        self.entries.push(Entry {
            name,
            value,
            grad: None,
        });
        Ok(ParamId(self.entries.len() - 1))
    }

    /// Copies every value of `other` in under `prefix` + its name.
    pub fn absorb(&mut self, prefix: &str, other: &ModelParams) -> Result<()> {
        for (name, value) in other.iter() {
            self.add(alloc::format!("{prefix}{name}"), value.clone())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> Option<&Matrix> {
        self.entries[id.0].grad.as_ref()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// `(name, value)` pairs in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.as_slice().len()).sum()
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, g: &Matrix) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if g.shape() != entry.value.shape() {
            return Err(Error::shape(
                alloc::format!("gradient of {}", entry.name),
                alloc::format!("{:?}", entry.value.shape()),
                alloc::format!("{:?}", g.shape()),
            ));
        }
        match &mut entry.grad {
            Some(existing) => {
                for (e, x) in existing.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *e += x;
                }
            }
            slot @ None => *slot = Some(g.clone()),
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad = None;
        }
    }

    /// Replaces the value of an existing parameter, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: Matrix) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if value.shape() != entry.value.shape() {
            return Err(Error::shape(
                alloc::format!("value of {}", entry.name),
                alloc::format!("{:?}", entry.value.shape()),
                alloc::format!("{:?}", value.shape()),
            ));
        }
        entry.value = value;
        Ok(())
    }

    /// Fails with the offending name when any value is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.entries.iter().find(|e| !e.value.is_finite()) {
            Some(e) => Err(Error::NonFinite(alloc::format!("parameter {:?}", e.name))),
            None => Ok(()),
        }
    }
}
