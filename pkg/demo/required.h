<id: required, name: required, type: required>
