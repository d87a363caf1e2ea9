/** Metadata-driven input widgets and client-side validation.
 *
 * The widget and the checks come entirely from the field descriptor: the
 * type picks the control, IsNullable adds the required marker, MaxLength
 * caps text input. Anything subtler stays a server concern.
 */

import type { Cell, Field } from "./types.js";

export type WidgetKind = "number" | "checkbox" | "datetime" | "text" | "textarea";

export function widgetFor(field: Field): WidgetKind {
  switch (field.DataType) {
    case "int":
    case "real":
      return "number";
    case "bit":
      return "checkbox";
    case "datetime":
      return "datetime";
    case "varchar":
      return field.MaxLength !== null && field.MaxLength > 0 ? "text" : "textarea";
  }
}

/** Basic client-side check; returns an error message or null when fine. */
export function validateCell(field: Field, cell: Cell): string | null {
  if (cell === null) {
    return field.IsNullable ? null : `${field.Name} is required`;
  }
  if (
    field.DataType === "varchar" &&
    field.MaxLength !== null &&
    field.MaxLength > 0 &&
    cell.length > field.MaxLength
  ) {
    return `${field.Name} allows at most ${field.MaxLength} characters`;
  }
  return null;
}

export function validateRow(fields: Field[], cells: Cell[]): string[] {
  const errors: string[] = [];
  fields.forEach((f, i) => {
    const err = validateCell(f, cells[i] ?? null);
    if (err) errors.push(err);
  });
  return errors;
}

interface FieldEditor {
  wrapper: HTMLElement;
  read: () => Cell;
  setError: (message: string | null) => void;
}

/** Build one labelled input for a field, pre-filled with a cell value. */
export function buildFieldEditor(doc: Document, field: Field, cell: Cell): FieldEditor {
  const wrapper = doc.createElement("label");
  wrapper.className = "field-editor";
  wrapper.dataset.field = field.Name;

  const caption = doc.createElement("span");
  caption.className = "field-name";
  caption.textContent = field.Name + (field.IsNullable ? "" : " *");
  caption.title = describeField(field);
  wrapper.appendChild(caption);

  const kind = widgetFor(field);
  let control: HTMLInputElement | HTMLTextAreaElement;
  let nullBox: HTMLInputElement | null = null;

  if (kind === "textarea") {
    control = doc.createElement("textarea");
  } else {
    control = doc.createElement("input");
    const input = control as HTMLInputElement;
    if (kind === "number") {
      input.type = "number";
      if (field.DataType === "real") input.step = "any";
    } else if (kind === "checkbox") {
      input.type = "checkbox";
    } else if (kind === "datetime") {
      input.type = "datetime-local";
      input.step = "1";
    } else {
      input.type = "text";
      if (field.MaxLength !== null && field.MaxLength > 0) {
        input.maxLength = field.MaxLength;
      }
    }
  }
  control.classList.add("field-input");
  if (!field.IsNullable && kind !== "checkbox") {
    control.required = true;
  }

  if (cell !== null) {
    if (kind === "checkbox") {
      (control as HTMLInputElement).checked = cell === "1";
    } else if (kind === "datetime") {
      // datetime-local cannot carry the Z suffix
      control.value = cell.replace(/Z$/, "");
    } else {
      control.value = cell;
    }
  }

  if (field.IsNullable) {
    nullBox = doc.createElement("input");
    nullBox.type = "checkbox";
    nullBox.className = "null-box";
    nullBox.checked = cell === null;
    control.disabled = cell === null;
    nullBox.addEventListener("change", () => {
      control.disabled = nullBox!.checked;
    });
    const nullLabel = doc.createElement("span");
    nullLabel.className = "null-label";
    nullLabel.appendChild(nullBox);
    nullLabel.appendChild(doc.createTextNode("null"));
    wrapper.appendChild(nullLabel);
  }

  wrapper.appendChild(control);

  const errorLine = doc.createElement("span");
  errorLine.className = "field-error";
  wrapper.appendChild(errorLine);

  const read = (): Cell => {
    if (nullBox?.checked) return null;
    if (kind === "checkbox") return (control as HTMLInputElement).checked ? "1" : "0";
    if (kind === "datetime") return control.value === "" ? null : control.value + "Z";
    if (kind === "number" && control.value === "") return null;
    // an empty box on a required text field is a missing value, not the
    // empty string (nullable fields express null via the checkbox instead)
    if (control.value === "" && !field.IsNullable) return null;
    return control.value;
  };

  return {
    wrapper,
    read,
    setError: (message) => {
      errorLine.textContent = message ?? "";
      wrapper.classList.toggle("invalid", message !== null);
    },
  };
}

export function describeField(field: Field): string {
  const bits: string[] = [field.DataType];
  if (field.MaxLength !== null) {
    bits.push(field.MaxLength === -1 ? "unlimited" : `max ${field.MaxLength}`);
  }
  bits.push(field.IsNullable ? "nullable" : "not null");
  if (field.Constraint) {
    bits.push(field.Constraint);
    if (field.Constraint === "FOREIGN KEY") {
      bits.push(`references ${field.PK_TableName}.${field.PK_FieldName}`);
    }
  }
  return bits.join(", ");
}
