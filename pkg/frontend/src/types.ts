/** Wire types of the dialog protocol (see docs/protocol.md). */

export type DataTypeName = "int" | "varchar" | "bit" | "real" | "datetime";

export type ConstraintKind = "PRIMARY KEY" | "FOREIGN KEY" | "UNIQUE" | "CHECK";

export interface TableHeader {
  TableName: string;
}

export interface Field {
  Name: string;
  Table: string;
  DataType: DataTypeName;
  /** varchar only: positive character count or -1 for unlimited; null otherwise */
  MaxLength: number | null;
  IsNullable: boolean;
  Constraint: ConstraintKind | null;
  PK_TableName: string | null;
  PK_FieldName: string | null;
}

export interface Relation {
  FK_TableName: string;
  FK_FieldName: string;
  PK_TableName: string;
  PK_FieldName: string;
}

/** One cell as it travels: canonical string, or null for the SQL null. */
export type Cell = string | null;

export interface TablePayload {
  Fields: Field[];
  Relations: Relation[];
  Items: Cell[][];
  RowIds: number[];
  Total: number;
}

export interface ApiErrorBody {
  error: string;
  message: string;
  offset?: number;
}

export interface ColumnSpec {
  name: string;
  data_type: DataTypeName;
  max_length?: number;
  is_nullable?: boolean;
  constraint?: "PRIMARY KEY" | "UNIQUE" | "CHECK";
}

export type SchemaChange =
  | { kind: "create-table"; table: string; columns: ColumnSpec[] }
  | { kind: "drop-table"; table: string }
  | { kind: "add-column"; table: string; column: ColumnSpec }
  | { kind: "drop-column"; table: string; column: string }
  | { kind: "add-foreign-key"; table: string; column: string; pk_table: string; pk_column: string }
  | { kind: "drop-constraint"; constraint: string };
