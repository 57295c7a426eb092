<type: optional>
