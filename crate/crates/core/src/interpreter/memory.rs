//! Cell-addressed memory. Every scalar occupies one cell; arrays and structs
//! are laid out flat, so a pointer is an object plus a cell offset.

use std::collections::BTreeMap;
use std::fmt;

use crate::program::{DataType, Param};

use super::Fault;

/// Address of a cell. `elem` is the pointee type and decides the stride of
/// pointer arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Ptr {
    pub obj: usize,
    pub off: i64,
    pub elem: DataType,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Uninit,
    Int(i32),
    Float(f64),
    Char(u8),
    Ptr(Ptr),
    Null,
    File(usize),
    /// A struct copied by value, one entry per cell.
    Aggregate(Vec<Value>),
    Void,
}

impl Value {
    pub fn describe(&self) -> &'static str {
        match self {
            Value::Uninit => "an uninitialized value",
            Value::Int(_) => "an int",
            Value::Float(_) => "a float",
            Value::Char(_) => "a char",
            Value::Ptr(_) => "a pointer",
            Value::Null => "NULL",
            Value::File(_) => "a file handle",
            Value::Aggregate(_) => "a struct",
            Value::Void => "no value",
        }
    }

    pub fn truthy(&self) -> Result<bool, Fault> {
        match self {
            Value::Int(i) => Ok(*i != 0),
            Value::Float(f) => Ok(*f != 0.0),
            Value::Char(c) => Ok(*c != 0),
            Value::Ptr(_) | Value::File(_) => Ok(true),
            Value::Null => Ok(false),
            other => Err(Fault::runtime(format!("{} cannot be used as a condition", other.describe()))),
        }
    }

    /// Integer value of an int or char.
    pub fn as_int(&self) -> Option<i32> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Char(c) => Some(i32::from(*c)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Stack,
    Heap,
    Literal,
}

#[derive(Debug, Clone)]
pub struct Object {
    pub cells: Vec<Value>,
    pub origin: Origin,
    pub alive: bool,
}

/// Upper bound on live heap cells, so `malloc` in a loop cannot exhaust the
/// host.
pub const MAX_HEAP_CELLS: usize = 1 << 20;
/// Upper bound on any single object.
pub const MAX_OBJECT_CELLS: usize = 1 << 20;

pub struct Memory {
    objects: Vec<Object>,
    structs: BTreeMap<String, Vec<Param>>,
    heap_cells: usize,
    literals: BTreeMap<String, usize>,
}

impl Memory {
    pub fn new(structs: BTreeMap<String, Vec<Param>>) -> Self {
        Memory {
            objects: Vec::new(),
            structs,
            heap_cells: 0,
            literals: BTreeMap::new(),
        }
    }

    /// Cells needed to store a value of `ty`.
    pub fn size_of(&self, ty: &DataType) -> Result<usize, Fault> {
        self.size_at(ty, 0)
    }

    fn size_at(&self, ty: &DataType, depth: usize) -> Result<usize, Fault> {
        if depth > 32 {
            return Err(Fault::invalid(format!("type `{ty}` contains itself")));
        }
        match ty {
            DataType::Void => Err(Fault::runtime("void has no size")),
            DataType::ArrayOf(inner, n) => {
                let total = self.size_at(inner, depth + 1)?.checked_mul(*n);
                total
                    .filter(|t| *t <= MAX_OBJECT_CELLS)
                    .ok_or_else(|| Fault::runtime(format!("type `{ty}` is too large")))
            }
            DataType::StructRef(name) => {
                let fields = self.fields(name)?;
                let mut total = 0usize;
                for f in fields {
                    total += self.size_at(&f.ty, depth + 1)?;
                }
                Ok(total)
            }
            _ => Ok(1),
        }
    }

    fn fields(&self, name: &str) -> Result<&[Param], Fault> {
        self.structs
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Fault::invalid(format!("struct `{name}` is not defined")))
    }

    /// Offset and type of a field inside a struct.
    pub fn field(&self, name: &str, field: &str) -> Result<(usize, DataType), Fault> {
        let mut off = 0;
        for f in self.fields(name)? {
            if f.name == field {
                return Ok((off, f.ty.clone()));
            }
            off += self.size_of(&f.ty)?;
        }
        Err(Fault::invalid(format!("struct `{name}` has no field `{field}`")))
    }

    pub fn alloc(&mut self, cells: usize, origin: Origin) -> Result<usize, Fault> {
        if cells > MAX_OBJECT_CELLS {
            return Err(Fault::runtime("allocation is too large"));
        }
        if origin == Origin::Heap {
            if self.heap_cells + cells > MAX_HEAP_CELLS {
                return Err(Fault::runtime("out of memory"));
            }
            self.heap_cells += cells;
        }
        self.objects.push(Object {
            cells: vec![Value::Uninit; cells],
            origin,
            alive: true,
        });
        Ok(self.objects.len() - 1)
    }

    /// A shared read-only object holding the bytes of a string literal plus
    /// the terminating zero.
    pub fn literal(&mut self, s: &str) -> usize {
        if let Some(&obj) = self.literals.get(s) {
            return obj;
        }
        let mut cells: Vec<Value> = s.bytes().map(Value::Char).collect();
        cells.push(Value::Char(0));
        self.objects.push(Object {
            cells,
            origin: Origin::Literal,
            alive: true,
        });
        let obj = self.objects.len() - 1;
        self.literals.insert(s.to_string(), obj);
        obj
    }

    /// Ends the lifetime of a stack object when its scope closes.
    pub fn expire(&mut self, obj: usize) {
        self.objects[obj].alive = false;
    }

    pub fn free(&mut self, p: &Ptr) -> Result<(), Fault> {
        let o = &mut self.objects[p.obj];
        match o.origin {
            Origin::Heap if !o.alive => Err(Fault::runtime("memory freed twice")),
            Origin::Heap if p.off != 0 => {
                Err(Fault::runtime("free needs the address returned by malloc"))
            }
            Origin::Heap => {
                o.alive = false;
                self.heap_cells -= o.cells.len();
                Ok(())
            }
            _ => Err(Fault::runtime("free of memory that was not allocated with malloc")),
        }
    }

    fn check(&self, obj: usize, off: i64, len: usize) -> Result<&Object, Fault> {
        let o = &self.objects[obj];
        if !o.alive {
            return Err(Fault::runtime(match o.origin {
                Origin::Heap => "use of memory after it was freed",
                _ => "use of a variable after its scope ended",
            }));
        }
        let end = off.checked_add(len as i64);
        if off < 0 || end.is_none_or(|e| e > o.cells.len() as i64) {
            return Err(Fault::runtime("access outside the bounds of an array or allocation"));
        }
        Ok(o)
    }

    pub fn read(&self, obj: usize, off: i64, len: usize) -> Result<Vec<Value>, Fault> {
        let o = self.check(obj, off, len)?;
        let start = off as usize;
        Ok(o.cells[start..start + len].to_vec())
    }

    pub fn read_cell(&self, obj: usize, off: i64) -> Result<Value, Fault> {
        let o = self.check(obj, off, 1)?;
        match &o.cells[off as usize] {
            Value::Uninit => Err(Fault::runtime("read of a value that was never assigned")),
            v => Ok(v.clone()),
        }
    }

    pub fn write(&mut self, obj: usize, off: i64, values: Vec<Value>) -> Result<(), Fault> {
        let o = self.check(obj, off, values.len())?;
        if o.origin == Origin::Literal {
            return Err(Fault::runtime("string literals cannot be modified"));
        }
        let start = off as usize;
        let o = &mut self.objects[obj];
        for (k, v) in values.into_iter().enumerate() {
            o.cells[start + k] = v;
        }
        Ok(())
    }

    /// Bytes of a zero-terminated string starting at `p`.
    pub fn c_string(&self, p: &Ptr) -> Result<Vec<u8>, Fault> {
        let mut out = Vec::new();
        let mut off = p.off;
        loop {
            match self.read_cell(p.obj, off)? {
                Value::Char(0) => return Ok(out),
                Value::Char(c) => out.push(c),
                other => {
                    return Err(Fault::runtime(format!("string contains {}", other.describe())))
                }
            }
            off += 1;
        }
    }
}
